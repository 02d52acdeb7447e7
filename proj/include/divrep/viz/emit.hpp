#pragma once

#include <json.hpp>

#include "divrep/trainer.hpp"
#include "divrep/viz/png.hpp"
#include "divrep/viz/tsne.hpp"

namespace divrep::viz {

inline std::array<uint8_t, 3> category_color(int k) {
  static const std::array<std::array<uint8_t, 3>, 12> palette{{{230, 25, 75},
                                                               {60, 180, 75},
                                                               {0, 130, 200},
                                                               {245, 130, 48},
                                                               {145, 30, 180},
                                                               {70, 240, 240},
                                                               {240, 50, 230},
                                                               {210, 160, 60},
                                                               {0, 128, 128},
                                                               {220, 190, 255},
                                                               {128, 0, 0},
                                                               {0, 0, 128}}};
  return palette[static_cast<size_t>(k) % palette.size()];
}

inline std::array<uint8_t, 3> heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);  // dark blue -> cyan -> yellow -> red
  double r = std::clamp(std::min(4.0 * t - 1.5, -4.0 * t + 4.5), 0.0, 1.0);
  double g = std::clamp(std::min(4.0 * t - 0.5, -4.0 * t + 3.5), 0.0, 1.0);
  double b = std::clamp(std::min(4.0 * t + 0.5, -4.0 * t + 2.5), 0.0, 1.0);
  return {static_cast<uint8_t>(r * 255), static_cast<uint8_t>(g * 255),
          static_cast<uint8_t>(b * 255)};
}

inline Canvas scatter_canvas(const Tensord& points, const std::vector<int>& categories,
                             int size = 560) {
  Canvas canvas(size, size);
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (int64_t i = 0; i < points.dim(0); ++i) {
    x0 = std::min(x0, points.at2(i, 0));
    x1 = std::max(x1, points.at2(i, 0));
    y0 = std::min(y0, points.at2(i, 1));
    y1 = std::max(y1, points.at2(i, 1));
  }
  double sx = x1 > x0 ? (size - 40) / (x1 - x0) : 1.0;
  double sy = y1 > y0 ? (size - 40) / (y1 - y0) : 1.0;
  for (int64_t i = 0; i < points.dim(0); ++i) {
    int px = 20 + static_cast<int>((points.at2(i, 0) - x0) * sx);
    int py = 20 + static_cast<int>((points.at2(i, 1) - y0) * sy);
    auto c = category_color(categories[static_cast<size_t>(i)]);
    canvas.disc(px, py, 2, c[0], c[1], c[2]);
  }
  for (int x = 0; x < size; ++x) {
    canvas.set(x, 0, 0, 0, 0);
    canvas.set(x, size - 1, 0, 0, 0);
    canvas.set(0, x, 0, 0, 0);
    canvas.set(size - 1, x, 0, 0, 0);
  }
  return canvas;
}

inline Canvas heatmap_canvas(const std::vector<std::vector<double>>& matrix, int cell = 14) {
  const int rows = static_cast<int>(matrix.size());
  const int cols = static_cast<int>(matrix[0].size());
  double lo = 1e300, hi = -1e300;
  for (auto& row : matrix)
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  Canvas canvas(cols * cell + 2, rows * cell + 2);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double t = hi > lo ? (matrix[static_cast<size_t>(r)][static_cast<size_t>(c)] - lo) / (hi - lo)
                         : 0.5;
      auto col = heat_color(t);
      canvas.fill_rect(1 + c * cell, 1 + r * cell, cell - 1, cell - 1, col[0], col[1], col[2]);
    }
  return canvas;
}

struct PlotOutputs {
  std::vector<std::string> files;
  int64_t embedding_points = 0;
};

struct PlotOptions {
  int64_t embed_max = 0;  // 0 = all test samples
  bool pca_fallback = false;
  int grid_cols = 10;
  uint64_t seed = 0;
};

// Appendix-style artifacts: latent embeddings, probe heatmaps, and the
// five-row reconstruction grid.
inline PlotOutputs export_plots(const VaeModel<float>& model, const data::DatasetBundle& bundle,
                                const data::SplitPair& splits, const fs::path& out_dir,
                                PlotOptions opt = {}) {
  fs::create_directories(out_dir);
  PlotOutputs out;
  const auto& part = model.partition();
  const auto& spec = bundle.grid.spec;

  // (a) 2-D embeddings of z_p and z_nu over the test split, colored by the
  // held-out nuisance group
  std::vector<int64_t> members = splits.test.members;
  if (opt.embed_max > 0 && opt.embed_max < static_cast<int64_t>(members.size())) {
    Rng rng(derive_seed(opt.seed, "plot-subsample"));
    rng.shuffle(members);
    members.resize(static_cast<size_t>(opt.embed_max));
    std::sort(members.begin(), members.end());
  }
  const int64_t n = static_cast<int64_t>(members.size());
  out.embedding_points = n;
  Tensord mu_p({n, part.dim_p}), mu_nu({n, part.dim_nu});
  std::vector<int> group(static_cast<size_t>(n), 0);
  const int64_t batch = 256;
  for (int64_t at = 0; at < n; at += batch) {
    int64_t hi = std::min(n, at + batch);
    auto x = render_rows<float>(bundle.grid, members, at, hi);
    auto code = model.encode(x);
    for (int64_t i = 0; i < hi - at; ++i) {
      for (int d = 0; d < part.dim_p; ++d) mu_p.at2(at + i, d) = code.mu.at2(i, d);
      for (int d = 0; d < part.dim_nu; ++d)
        mu_nu.at2(at + i, d) = code.mu.at2(i, part.n_begin() + part.dim_nk + d);
      if (bundle.group_factor >= 0) {
        auto tuple = bundle.grid.tuple_of(members[static_cast<size_t>(at + i)]);
        group[static_cast<size_t>(at + i)] = tuple[static_cast<size_t>(bundle.group_factor)];
      }
    }
  }
  EmbedOptions eopt;
  eopt.pca_fallback = opt.pca_fallback;
  eopt.seed = opt.seed;
  for (auto& [name, feats] : {std::pair<std::string, Tensord&>{"embed_zp.png", mu_p},
                              std::pair<std::string, Tensord&>{"embed_znu.png", mu_nu}}) {
    auto y = tsne_2d(feats, eopt);
    write_png(out_dir / name, scatter_canvas(y, group));
    out.files.push_back(name);
  }

  // (b) latent-activation heatmaps under controlled single-factor changes:
  // one probe on a known nuisance factor, one on the predictive factor
  std::vector<int> probes;
  if (!spec.known_nuisance_indices.empty()) probes.push_back(spec.known_nuisance_indices.back());
  probes.push_back(spec.predictive_index);
  std::vector<int> base_tuple(static_cast<size_t>(spec.num_factors()), 0);
  for (int f = 0; f < spec.num_factors(); ++f)
    base_tuple[static_cast<size_t>(f)] =
        splits.train.allowed_values[static_cast<size_t>(f)].front();
  for (int f : probes) {
    const auto& values = splits.train.allowed_values[static_cast<size_t>(f)];
    std::vector<std::vector<double>> matrix;
    for (int v : values) {
      auto tuple = base_tuple;
      tuple[static_cast<size_t>(f)] = v;
      auto img = bundle.grid.render(tuple);
      Tensorf x({1, img.dim(0), img.dim(1), img.dim(2)});
      std::copy(img.ptr(), img.ptr() + img.numel(), x.ptr());
      auto code = model.encode(x);
      std::vector<double> row;
      for (int64_t d = 0; d < code.dims(); ++d) row.push_back(code.mu.at2(0, d));
      matrix.push_back(std::move(row));
    }
    std::string name = "heatmap_" + spec.factors[static_cast<size_t>(f)].name + ".png";
    write_png(out_dir / name, heatmap_canvas(matrix));
    out.files.push_back(name);
  }

  // (c) reconstruction grid: originals, reconstructions, post-swap
  // reconstructions, decode([rand z_p, z_n]), decode([z_p, rand z_n])
  const int cols = opt.grid_cols;
  data::PairOptions popt;
  popt.eligible = bundle.pair_eligible;
  popt.allowed = splits.train.allowed_values;
  Rng rng(derive_seed(opt.seed, "plot-recon"));
  std::vector<data::PairSample> pairs;
  for (int c = 0; c < (cols + 1) / 2; ++c)
    pairs.push_back(data::sample_pair(bundle.grid, 1, rng, popt));

  const auto sh = bundle.grid.image_shape;
  const int64_t per = sh[0] * sh[1] * sh[2];
  Tensorf x({cols, sh[0], sh[1], sh[2]});
  std::vector<int> pair_of_col(static_cast<size_t>(cols));
  for (int c = 0; c < cols; ++c) {
    const auto& p = pairs[static_cast<size_t>(c / 2)];
    const Tensorf& src = (c % 2 == 0) ? p.x_l : p.x_m;
    std::copy(src.ptr(), src.ptr() + per, x.ptr() + c * per);
    pair_of_col[static_cast<size_t>(c)] = c / 2;
  }
  auto code = model.encode(x);
  Rng zrng(derive_seed(opt.seed, "plot-z"));
  auto z = reparameterize(code, zrng);
  auto recon = model.decode(z);

  // swap within columns pairs (2c, 2c+1)
  Tensorf z_swap = z;
  for (int c = 0; c + 1 < cols; c += 2) {
    GaussianCode<float> codes{code.mu, code.log_var, part};
    auto div = pairwise_divergence(codes, codes, c, c + 1);
    auto plan = select_keep_set(div, 1, part);
    auto mask = swap_mask<float>(plan, part);
    for (int64_t d = 0; d < mask.numel(); ++d)
      if (mask[d] > 0.5f) std::swap(z_swap.at2(c, d), z_swap.at2(c + 1, d));
  }
  auto recon_swap = model.decode(z_swap);

  Tensorf z_rand_p = z, z_rand_n = z;
  for (int c = 0; c < cols; ++c) {
    for (int d = 0; d < part.dim_p; ++d) z_rand_p.at2(c, d) = static_cast<float>(zrng.normal());
    for (int d = part.n_begin(); d < part.n_end(); ++d)
      z_rand_n.at2(c, d) = static_cast<float>(zrng.normal());
  }
  auto recon_rand_p = model.decode(z_rand_p);
  auto recon_rand_n = model.decode(z_rand_n);

  const int scale = sh[1] <= 32 ? 3 : 2;
  const int gap = 3;
  int tile_w = static_cast<int>(sh[2]) * scale, tile_h = static_cast<int>(sh[1]) * scale;
  Canvas canvas(cols * (tile_w + gap) + gap, 5 * (tile_h + gap) + gap, 24, 24, 24);
  auto blit_row = [&](const Tensorf& batch4, int row) {
    for (int c = 0; c < cols; ++c) {
      Tensorf img({sh[0], sh[1], sh[2]});
      std::copy(batch4.ptr() + c * per, batch4.ptr() + (c + 1) * per, img.ptr());
      blit_image(canvas, img, gap + c * (tile_w + gap), gap + row * (tile_h + gap), scale);
    }
  };
  blit_row(x, 0);
  blit_row(recon, 1);
  blit_row(recon_swap, 2);
  blit_row(recon_rand_p, 3);
  blit_row(recon_rand_n, 4);
  write_png(out_dir / "recon_grid.png", canvas);
  out.files.push_back("recon_grid.png");

  nlohmann::json meta = {{"files", out.files}, {"embedding_points", out.embedding_points}};
  std::ofstream mf(out_dir / "plots.json");
  mf << meta.dump(2) << "\n";
  out.files.push_back("plots.json");
  return out;
}

}  // namespace divrep::viz
