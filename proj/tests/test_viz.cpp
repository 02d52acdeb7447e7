#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "divrep/viz/emit.hpp"

using namespace divrep;
namespace fs = std::filesystem;

TEST_CASE("png writer emits a well-formed file") {
  viz::Canvas canvas(20, 12);
  canvas.fill_rect(2, 2, 8, 6, 200, 30, 30);
  canvas.disc(15, 6, 3, 30, 30, 200);
  auto path = fs::temp_directory_path() / "divrep_viz_test.png";
  viz::write_png(path, canvas);
  auto bytes = data::read_raw<uint8_t>(path, static_cast<int64_t>(fs::file_size(path)));
  const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  REQUIRE(bytes.size() > 50);
  for (int i = 0; i < 8; ++i) REQUIRE(bytes[static_cast<size_t>(i)] == sig[i]);
  REQUIRE(std::string(bytes.begin() + 12, bytes.begin() + 16) == "IHDR");
  fs::remove(path);
}

TEST_CASE("tsne separates two well-spaced clusters") {
  const int n = 60;
  Tensord x({n, 5});
  Rng rng(4);
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) {
    int c = i < n / 2 ? 0 : 1;
    labels.push_back(c);
    for (int d = 0; d < 5; ++d) x.at2(i, d) = rng.normal() * 0.3 + (c ? 6.0 : 0.0);
  }
  viz::EmbedOptions opt;
  opt.iterations = 250;
  auto y = viz::tsne_2d(x, opt);
  // centroid distance should dominate within-cluster spread
  double cx[2] = {0, 0}, cy[2] = {0, 0};
  for (int i = 0; i < n; ++i) {
    cx[labels[static_cast<size_t>(i)]] += y.at2(i, 0) / (n / 2);
    cy[labels[static_cast<size_t>(i)]] += y.at2(i, 1) / (n / 2);
  }
  double between = std::hypot(cx[0] - cx[1], cy[0] - cy[1]);
  double within = 0;
  for (int i = 0; i < n; ++i) {
    int c = labels[static_cast<size_t>(i)];
    within += std::hypot(y.at2(i, 0) - cx[c], y.at2(i, 1) - cy[c]) / n;
  }
  REQUIRE(between > 2.0 * within);
}

TEST_CASE("pca fallback produces finite 2-D points") {
  Tensord x({30, 7});
  Rng rng(5);
  rng.fill_normal(x);
  viz::EmbedOptions opt;
  opt.pca_fallback = true;
  auto y = viz::tsne_2d(x, opt);
  REQUIRE(y.shape == std::vector<int64_t>{30, 2});
  REQUIRE(y.all_finite());
}

TEST_CASE("export_plots emits every artifact with one embedding point per test sample") {
  data::ColoredMnistConfig dcfg;
  dcfg.sources = 4;
  dcfg.train_sources = 3;
  auto bundle = data::make_colored_mnist(dcfg);
  auto splits = data::make_splits(bundle.grid, bundle.policy);
  ModelConfig mc;
  mc.image_c = 3;
  mc.image_h = 28;
  mc.image_w = 28;
  mc.enc_channels = {8, 16};
  mc.fc_dim = 32;
  mc.partition = {.dim_p = 4, .dim_nk = 2, .dim_nu = 2};
  mc.classifier_hidden = {16};
  mc.num_classes = 10;
  mc.projection_hidden = {16};
  mc.projection_dim = 8;
  VaeModel<float> model(mc, 11);

  auto dir = fs::temp_directory_path() / "divrep_plots_test";
  fs::remove_all(dir);
  viz::PlotOptions popt;
  popt.pca_fallback = true;  // keep the test fast; t-SNE is covered above
  auto out = viz::export_plots(model, bundle, splits, dir, popt);

  REQUIRE(out.embedding_points == static_cast<int64_t>(splits.test.members.size()));
  for (const char* name : {"embed_zp.png", "embed_znu.png", "heatmap_bg.png",
                           "heatmap_digit.png", "recon_grid.png", "plots.json"})
    REQUIRE(fs::exists(dir / name));
  std::ifstream mf(dir / "plots.json");
  auto meta = nlohmann::json::parse(mf);
  REQUIRE(meta.at("embedding_points").get<int64_t>() == out.embedding_points);
  fs::remove_all(dir);
}
