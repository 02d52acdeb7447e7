#pragma once

#include <array>
#include <mutex>
#include <unordered_map>

#include "divrep/data/factors.hpp"

namespace divrep::data {

using Rgb = std::array<float, 3>;

// ---------------------------------------------------------------------------
// stroke glyphs
// ---------------------------------------------------------------------------

namespace glyph {

struct Pt {
  float x, y;
};
using Stroke = std::vector<Pt>;

// Digit skeletons in a unit box, y pointing down.
inline const std::vector<std::vector<Stroke>>& skeletons() {
  static const std::vector<std::vector<Stroke>> s = {
      // 0
      {{{0.50f, 0.12f}, {0.74f, 0.22f}, {0.80f, 0.50f}, {0.74f, 0.78f}, {0.50f, 0.88f},
        {0.26f, 0.78f}, {0.20f, 0.50f}, {0.26f, 0.22f}, {0.50f, 0.12f}}},
      // 1
      {{{0.34f, 0.30f}, {0.54f, 0.13f}, {0.54f, 0.88f}}},
      // 2
      {{{0.26f, 0.30f}, {0.34f, 0.16f}, {0.54f, 0.12f}, {0.72f, 0.22f}, {0.73f, 0.38f},
        {0.58f, 0.56f}, {0.38f, 0.70f}, {0.25f, 0.84f}, {0.78f, 0.84f}}},
      // 3
      {{{0.28f, 0.18f}, {0.52f, 0.12f}, {0.72f, 0.26f}, {0.62f, 0.44f}, {0.44f, 0.50f}},
       {{0.44f, 0.50f}, {0.68f, 0.56f}, {0.74f, 0.73f}, {0.54f, 0.88f}, {0.27f, 0.80f}}},
      // 4
      {{{0.58f, 0.12f}, {0.22f, 0.62f}, {0.80f, 0.62f}}, {{0.60f, 0.34f}, {0.60f, 0.88f}}},
      // 5
      {{{0.72f, 0.14f}, {0.32f, 0.14f}, {0.29f, 0.45f}, {0.50f, 0.41f}, {0.70f, 0.51f},
        {0.72f, 0.71f}, {0.52f, 0.86f}, {0.27f, 0.79f}}},
      // 6
      {{{0.68f, 0.15f}, {0.45f, 0.24f}, {0.30f, 0.46f}, {0.28f, 0.68f}, {0.44f, 0.86f},
        {0.64f, 0.80f}, {0.71f, 0.62f}, {0.57f, 0.48f}, {0.33f, 0.56f}}},
      // 7
      {{{0.24f, 0.14f}, {0.78f, 0.14f}, {0.46f, 0.88f}}},
      // 8
      {{{0.50f, 0.12f}, {0.69f, 0.20f}, {0.67f, 0.37f}, {0.50f, 0.47f}, {0.33f, 0.37f},
        {0.31f, 0.20f}, {0.50f, 0.12f}},
       {{0.50f, 0.47f}, {0.71f, 0.58f}, {0.73f, 0.77f}, {0.50f, 0.88f}, {0.27f, 0.77f},
        {0.29f, 0.58f}, {0.50f, 0.47f}}},
      // 9
      {{{0.50f, 0.12f}, {0.69f, 0.20f}, {0.71f, 0.36f}, {0.52f, 0.46f}, {0.33f, 0.38f},
        {0.31f, 0.20f}, {0.50f, 0.12f}},
       {{0.70f, 0.28f}, {0.68f, 0.60f}, {0.50f, 0.88f}}},
  };
  return s;
}

inline Stroke chaikin(const Stroke& in) {
  if (in.size() < 3) return in;
  Stroke out;
  out.push_back(in.front());
  for (size_t i = 0; i + 1 < in.size(); ++i) {
    const Pt &a = in[i], &b = in[i + 1];
    out.push_back({0.75f * a.x + 0.25f * b.x, 0.75f * a.y + 0.25f * b.y});
    out.push_back({0.25f * a.x + 0.75f * b.x, 0.25f * a.y + 0.75f * b.y});
  }
  out.push_back(in.back());
  return out;
}

struct Distortion {
  float shear = 0.f, scale = 1.f, dx = 0.f, dy = 0.f;
  float warp_ax = 0.f, warp_ay = 0.f, warp_fx = 1.f, warp_fy = 1.f, ph_x = 0.f, ph_y = 0.f;
  float thickness = 0.065f;
};

inline Distortion sample_distortion(int digit, int source_index, float extra_thickness = 0.f) {
  Rng rng(derive_seed(0x5eedD161ULL + static_cast<uint64_t>(digit) * 1000003ULL,
                      "glyph-" + std::to_string(source_index)));
  Distortion d;
  d.shear = static_cast<float>(rng.uniform(-0.22, 0.22));
  d.scale = static_cast<float>(rng.uniform(0.82, 1.02));
  d.dx = static_cast<float>(rng.uniform(-0.04, 0.04));
  d.dy = static_cast<float>(rng.uniform(-0.04, 0.04));
  d.warp_ax = static_cast<float>(rng.uniform(0.0, 0.035));
  d.warp_ay = static_cast<float>(rng.uniform(0.0, 0.035));
  d.warp_fx = static_cast<float>(rng.uniform(0.7, 1.6));
  d.warp_fy = static_cast<float>(rng.uniform(0.7, 1.6));
  d.ph_x = static_cast<float>(rng.uniform(0.0, 6.28318));
  d.ph_y = static_cast<float>(rng.uniform(0.0, 6.28318));
  d.thickness = static_cast<float>(rng.uniform(0.050, 0.085)) + extra_thickness;
  return d;
}

inline Pt apply_distortion(Pt p, const Distortion& d) {
  p.x += d.warp_ax * std::sin(6.28318f * (d.warp_fy * p.y) + d.ph_x);
  p.y += d.warp_ay * std::sin(6.28318f * (d.warp_fx * p.x) + d.ph_y);
  p.x += d.shear * (0.5f - p.y);
  p.x = 0.5f + d.scale * (p.x - 0.5f) + d.dx;
  p.y = 0.5f + d.scale * (p.y - 0.5f) + d.dy;
  return p;
}

// Anti-aliased grayscale stroke mask in [0,1], shape [H, W].
inline Tensorf render_mask(int digit, int source_index, int height, int width,
                           float extra_thickness = 0.f) {
  DIVREP_CHECK(digit >= 0 && digit <= 9, "digit id must be 0-9");
  DIVREP_CHECK(source_index >= 0, "source index must be >= 0");
  auto dist = sample_distortion(digit, source_index, extra_thickness);
  Tensorf mask({height, width}, 0.f);
  const float radius = dist.thickness * static_cast<float>(std::min(height, width));
  const float step = 0.35f / static_cast<float>(std::min(height, width));
  for (const auto& raw : skeletons()[static_cast<size_t>(digit)]) {
    Stroke s = chaikin(chaikin(raw));
    for (auto& p : s) p = apply_distortion(p, dist);
    for (size_t i = 0; i + 1 < s.size(); ++i) {
      float segx = s[i + 1].x - s[i].x, segy = s[i + 1].y - s[i].y;
      float len = std::sqrt(segx * segx + segy * segy);
      int nsteps = std::max(1, static_cast<int>(len / step));
      for (int t = 0; t <= nsteps; ++t) {
        float f = static_cast<float>(t) / static_cast<float>(nsteps);
        float cx = (s[i].x + f * segx) * static_cast<float>(width);
        float cy = (s[i].y + f * segy) * static_cast<float>(height);
        int x0 = std::max(0, static_cast<int>(cx - radius - 1.f));
        int x1 = std::min(width - 1, static_cast<int>(cx + radius + 1.f));
        int y0 = std::max(0, static_cast<int>(cy - radius - 1.f));
        int y1 = std::min(height - 1, static_cast<int>(cy + radius + 1.f));
        for (int y = y0; y <= y1; ++y)
          for (int x = x0; x <= x1; ++x) {
            float ddx = static_cast<float>(x) + 0.5f - cx;
            float ddy = static_cast<float>(y) + 0.5f - cy;
            float dd = std::sqrt(ddx * ddx + ddy * ddy);
            float cov = std::min(1.f, std::max(0.f, (radius + 0.5f - dd)));
            auto& m = mask.at2(y, x);
            m = std::max(m, cov);
          }
      }
    }
  }
  return mask;
}

}  // namespace glyph

// Bilinear rotation about the image center, corners zero-padded. Exact
// identity at angle 0.
inline Tensorf rotate_bilinear(const Tensorf& img, double angle_degrees) {
  DIVREP_CHECK(img.rank() == 2, "rotate_bilinear expects [H, W]");
  const int64_t H = img.dim(0), W = img.dim(1);
  const double rad = angle_degrees * M_PI / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cy = 0.5 * static_cast<double>(H - 1), cx = 0.5 * static_cast<double>(W - 1);
  Tensorf out({H, W}, 0.f);
  for (int64_t y = 0; y < H; ++y) {
    for (int64_t x = 0; x < W; ++x) {
      // inverse map: rotate output coordinate back into the source frame
      double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      double sx = c * dx + s * dy + cx;
      double sy = -s * dx + c * dy + cy;
      int64_t x0 = static_cast<int64_t>(std::floor(sx)), y0 = static_cast<int64_t>(std::floor(sy));
      double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
      double acc = 0.0;
      for (int oy = 0; oy <= 1; ++oy)
        for (int ox = 0; ox <= 1; ++ox) {
          int64_t px = x0 + ox, py = y0 + oy;
          if (px < 0 || px >= W || py < 0 || py >= H) continue;
          double wgt = (ox ? fx : 1.0 - fx) * (oy ? fy : 1.0 - fy);
          acc += wgt * static_cast<double>(img.at2(py, px));
        }
      out.at2(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// palettes and colored renders
// ---------------------------------------------------------------------------

struct MnistPalettes {
  // held-out backgrounds shift both hue and brightness relative to training;
  // calibrated so a plain CE classifier degrades hard while stroke shape
  // stays recoverable
  std::vector<Rgb> bg_train{{0.15f, 0.20f, 0.55f}, {0.12f, 0.45f, 0.18f}, {0.50f, 0.12f, 0.15f}};
  std::vector<Rgb> bg_test{{0.18f, 0.68f, 0.66f}, {0.60f, 0.28f, 0.75f}, {0.62f, 0.16f, 0.28f}};
  std::vector<Rgb> fg{{0.95f, 0.95f, 0.95f}, {0.95f, 0.55f, 0.10f}, {0.35f, 0.65f, 0.95f},
                      {0.45f, 0.90f, 0.40f}, {0.95f, 0.50f, 0.70f}, {0.70f, 0.55f, 0.95f}};

  int bg_count() const { return static_cast<int>(bg_train.size() + bg_test.size()); }
  int fg_count() const { return static_cast<int>(fg.size()); }

  Rgb bg(int index) const {
    DIVREP_CHECK_CFG(index >= 0 && index < bg_count(), "unknown background palette index");
    if (index < static_cast<int>(bg_train.size())) return bg_train[static_cast<size_t>(index)];
    return bg_test[static_cast<size_t>(index - static_cast<int>(bg_train.size()))];
  }
  Rgb fg_color(int index) const {
    DIVREP_CHECK_CFG(index >= 0 && index < fg_count(), "unknown foreground palette index");
    return fg[static_cast<size_t>(index)];
  }

  void validate() const {
    DIVREP_CHECK_CFG(!bg_train.empty() && !bg_test.empty() && !fg.empty(), "empty palette");
    std::vector<Rgb> all;
    for (auto& c : bg_train) all.push_back(c);
    for (auto& c : bg_test) all.push_back(c);
    for (auto& c : fg) all.push_back(c);
    for (size_t i = 0; i < all.size(); ++i)
      for (size_t j = i + 1; j < all.size(); ++j)
        DIVREP_CHECK_CFG(all[i] != all[j], "palettes must be pairwise disjoint");
  }
};

inline Tensorf colorize_mask(const Tensorf& mask, Rgb fg, Rgb bg) {
  DIVREP_CHECK(fg != bg, "foreground color must differ from background");
  const int64_t H = mask.dim(0), W = mask.dim(1);
  Tensorf img({3, H, W});
  for (int ch = 0; ch < 3; ++ch)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x = 0; x < W; ++x) {
        float m = mask.at2(y, x);
        img[(ch * H + y) * W + x] =
            bg[static_cast<size_t>(ch)] * (1.f - m) + fg[static_cast<size_t>(ch)] * m;
      }
  return img;
}

// Grayscale strokes of (digit, source) recolored to fg over a solid bg.
inline Tensorf render_colored_mnist(int digit_id, int source_index, int bg_color, int fg_color,
                                    const MnistPalettes& palettes, int height = 28,
                                    int width = 28, double angle_degrees = 0.0,
                                    float stroke_jitter = 0.f) {
  palettes.validate();
  Tensorf mask = glyph::render_mask(digit_id, source_index, height, width, stroke_jitter);
  if (angle_degrees != 0.0) mask = rotate_bilinear(mask, angle_degrees);
  return colorize_mask(mask, palettes.fg_color(fg_color), palettes.bg(bg_color));
}

// ---------------------------------------------------------------------------
// dataset bundles
// ---------------------------------------------------------------------------

struct ColoredMnistConfig {
  int image_size = 28;
  int sources = 40;
  int train_sources = 32;  // remaining sources are held out for test
  MnistPalettes palettes;
  bool pairs_fix_class = false;
  // optional deterministic per-sample stroke-thickness jitter (render noise w)
  bool stroke_jitter = false;
  std::vector<double> angles;  // empty = no rotation factor
  std::vector<int> train_angle_ids, test_angle_ids;

  void validate() const {
    DIVREP_CHECK_CFG(image_size >= 16, "image too small for glyph strokes");
    DIVREP_CHECK_CFG(sources >= 2 && train_sources >= 1 && train_sources < sources,
                     "need held-out sources");
    palettes.validate();
    if (!angles.empty()) {
      DIVREP_CHECK_CFG(!train_angle_ids.empty() && !test_angle_ids.empty(),
                       "rotation dataset needs train and test angle ids");
      for (int a : train_angle_ids)
        DIVREP_CHECK_CFG(a >= 0 && a < static_cast<int>(angles.size()), "angle id range");
      for (int a : test_angle_ids)
        DIVREP_CHECK_CFG(a >= 0 && a < static_cast<int>(angles.size()), "angle id range");
    }
  }
};

inline ColoredMnistConfig rotation_colored_mnist_defaults() {
  ColoredMnistConfig cfg;
  cfg.angles = {0.0, 22.5, -22.5, 45.0, -45.0, 65.0, -65.0, 75.0, -75.0};
  cfg.train_angle_ids = {0, 1, 2, 3, 4};
  cfg.test_angle_ids = {5, 6, 7, 8};
  return cfg;
}

// Factors: digit, source, fg, bg (+ angle for the rotation variant). digit is
// predictive; fg/bg are the known nuisance factors; source (and angle) are
// unknown nuisance axes that pairs never change deliberately.
inline DatasetBundle make_colored_mnist(ColoredMnistConfig cfg) {
  cfg.validate();
  const bool rotated = !cfg.angles.empty();

  FactorSpec spec;
  spec.factors = {{"digit", 10},
                  {"source", cfg.sources},
                  {"fg", cfg.palettes.fg_count()},
                  {"bg", cfg.palettes.bg_count()}};
  if (rotated) spec.factors.push_back({"angle", static_cast<int>(cfg.angles.size())});
  spec.predictive_index = 0;
  spec.known_nuisance_indices = {2, 3};
  spec.validate();

  auto cache = std::make_shared<std::unordered_map<int64_t, Tensorf>>();
  auto cache_mutex = std::make_shared<std::mutex>();
  const int size = cfg.image_size;
  const auto palettes = cfg.palettes;
  const auto angles = cfg.angles;
  const bool jitter = cfg.stroke_jitter;
  const int sources = cfg.sources;

  DatasetBundle bundle;
  bundle.name = rotated ? "rotation_colored_mnist" : "colored_mnist";
  bundle.grid.spec = spec;
  bundle.grid.image_shape = {3, size, size};
  bundle.grid.render = [=](const std::vector<int>& tuple) {
    int digit = tuple[0], source = tuple[1], fg = tuple[2], bg = tuple[3];
    int angle_id = rotated ? tuple[4] : -1;
    float extra = 0.f;
    if (jitter) {
      // deterministic thickness jitter keyed by the sample's glyph identity
      Rng jr(derive_seed(static_cast<uint64_t>(digit * sources + source), "stroke-jitter"));
      extra = static_cast<float>(jr.uniform(-0.012, 0.012));
    }
    int64_t key = ((static_cast<int64_t>(digit) * sources + source) *
                       (rotated ? static_cast<int64_t>(angles.size()) : 1) +
                   std::max(0, angle_id));
    Tensorf mask;
    {
      std::lock_guard<std::mutex> lk(*cache_mutex);
      auto it = cache->find(key);
      if (it != cache->end()) mask = it->second;
    }
    if (mask.numel() == 0) {
      mask = glyph::render_mask(digit, source, size, size, extra);
      if (angle_id >= 0 && angles[static_cast<size_t>(angle_id)] != 0.0)
        mask = rotate_bilinear(mask, angles[static_cast<size_t>(angle_id)]);
      std::lock_guard<std::mutex> lk(*cache_mutex);
      cache->emplace(key, mask);
    }
    return colorize_mask(mask, palettes.fg_color(fg), palettes.bg(bg));
  };

  std::vector<int> test_sources;
  for (int s = cfg.train_sources; s < cfg.sources; ++s) test_sources.push_back(s);
  std::vector<int> test_bgs;
  for (int b = static_cast<int>(palettes.bg_train.size()); b < palettes.bg_count(); ++b)
    test_bgs.push_back(b);
  bundle.policy.held_out = {{1, test_sources}, {3, test_bgs}};
  if (rotated) {
    std::vector<int> test_angles(cfg.test_angle_ids);
    bundle.policy.held_out.push_back({4, test_angles});
    bundle.group_factor = 4;  // worst accuracy over rotation angles
  } else {
    bundle.group_factor = 3;  // worst accuracy over held-out background colors
  }

  bundle.pair_eligible = {2, 3};  // fg, bg
  if (!cfg.pairs_fix_class) bundle.pair_eligible.insert(bundle.pair_eligible.begin(), 0);
  return bundle;
}

}  // namespace divrep::data
