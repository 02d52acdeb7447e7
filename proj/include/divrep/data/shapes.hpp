#pragma once

#include "divrep/data/digits.hpp"

namespace divrep::data {

// Desk-scale factorized shapes grid: shape x color x scale x pos_x x pos_y
// rendered with signed-distance coverage so every tuple is distinct.
struct ShapesConfig {
  int canvas = 64;
  int shapes = 4;  // square, circle, triangle, diamond
  int colors = 8;
  int scales = 4;
  int pos = 8;  // per axis
  float min_radius_frac = 0.10f;
  float max_radius_frac = 0.18f;
  Rgb background{0.05f, 0.05f, 0.05f};
  bool pairs_fix_class = false;

  void validate() const {
    DIVREP_CHECK_CFG(shapes >= 2 && shapes <= 4, "shape count must be 2-4");
    DIVREP_CHECK_CFG(colors >= 2 && scales >= 2 && pos >= 2, "cardinalities >= 2");
    DIVREP_CHECK_CFG(canvas >= 8, "canvas too small");
    float margin = max_radius_frac * static_cast<float>(canvas) + 2.f;
    DIVREP_CHECK_CFG(static_cast<float>(canvas) - 2.f * margin >
                         static_cast<float>(pos - 1) * 0.9f,
                     "canvas too small for max scale");
  }
};

inline Rgb hsv_to_rgb(float h, float s, float v) {
  float c = v * s;
  float hp = h * 6.f;
  float x = c * (1.f - std::abs(std::fmod(hp, 2.f) - 1.f));
  float r = 0, g = 0, b = 0;
  if (hp < 1) r = c, g = x;
  else if (hp < 2) r = x, g = c;
  else if (hp < 3) g = c, b = x;
  else if (hp < 4) g = x, b = c;
  else if (hp < 5) r = x, b = c;
  else r = c, b = x;
  float m = v - c;
  return {r + m, g + m, b + m};
}

inline std::vector<Rgb> shapes_palette(int n) {
  std::vector<Rgb> out;
  for (int i = 0; i < n; ++i)
    out.push_back(hsv_to_rgb(static_cast<float>(i) / static_cast<float>(n), 0.75f, 0.90f));
  return out;
}

namespace sdf {

inline float circle(float px, float py, float r) { return std::sqrt(px * px + py * py) - r; }

inline float square(float px, float py, float r) {
  float qx = std::abs(px) - r, qy = std::abs(py) - r;
  float ox = std::max(qx, 0.f), oy = std::max(qy, 0.f);
  return std::sqrt(ox * ox + oy * oy) + std::min(std::max(qx, qy), 0.f);
}

inline float diamond(float px, float py, float r) {
  return (std::abs(px) + std::abs(py) - r * 1.35f) * 0.70710678f;
}

inline float triangle(float px, float py, float r) {
  const float k = 1.7320508f;
  px = std::abs(px) - r;
  py = py + r / k;
  if (px + k * py > 0.f) {
    float nx = (px - k * py) / 2.f, ny = (-k * px - py) / 2.f;
    px = nx;
    py = ny;
  }
  px -= std::min(std::max(px, -2.f * r), 0.f);
  return std::sqrt(px * px + py * py) * (py > 0.f ? -1.f : 1.f);
}

}  // namespace sdf

inline DatasetBundle synth_shapes_grid(ShapesConfig cfg = {}) {
  cfg.validate();

  FactorSpec spec;
  spec.factors = {{"shape", cfg.shapes},
                  {"color", cfg.colors},
                  {"scale", cfg.scales},
                  {"pos_x", cfg.pos},
                  {"pos_y", cfg.pos}};
  spec.predictive_index = 0;
  spec.known_nuisance_indices = {1};
  spec.validate();

  const auto palette = shapes_palette(cfg.colors);
  const int canvas = cfg.canvas;
  const float r_min = cfg.min_radius_frac * static_cast<float>(canvas);
  const float r_max = cfg.max_radius_frac * static_cast<float>(canvas);
  const float margin = r_max + 2.f;
  const float span = static_cast<float>(canvas) - 2.f * margin;
  const int scales = cfg.scales, pos = cfg.pos;
  const Rgb bg = cfg.background;

  DatasetBundle bundle;
  bundle.name = "shapes_grid";
  bundle.grid.spec = spec;
  bundle.grid.image_shape = {3, canvas, canvas};
  bundle.grid.render = [=](const std::vector<int>& tuple) {
    int shape = tuple[0], color = tuple[1], scale = tuple[2], px = tuple[3], py = tuple[4];
    float r = r_min + (r_max - r_min) * static_cast<float>(scale) /
                          static_cast<float>(scales - 1);
    float cx = margin + span * static_cast<float>(px) / static_cast<float>(pos - 1);
    float cy = margin + span * static_cast<float>(py) / static_cast<float>(pos - 1);
    Rgb fg = palette[static_cast<size_t>(color)];
    Tensorf img({3, canvas, canvas});
    for (int y = 0; y < canvas; ++y)
      for (int x = 0; x < canvas; ++x) {
        float dx = static_cast<float>(x) + 0.5f - cx, dy = static_cast<float>(y) + 0.5f - cy;
        float d;
        switch (shape) {
          case 0: d = sdf::square(dx, dy, r * 0.82f); break;
          case 1: d = sdf::circle(dx, dy, r); break;
          case 2: d = sdf::triangle(dx, dy, r * 1.05f); break;
          default: d = sdf::diamond(dx, dy, r); break;
        }
        float cov = std::min(1.f, std::max(0.f, 0.5f - d));
        for (int ch = 0; ch < 3; ++ch)
          img[(ch * canvas + y) * canvas + x] =
              bg[static_cast<size_t>(ch)] * (1.f - cov) + fg[static_cast<size_t>(ch)] * cov;
      }
    return img;
  };

  // hold out the second half of object colors
  std::vector<int> held;
  for (int c = cfg.colors / 2; c < cfg.colors; ++c) held.push_back(c);
  bundle.policy.held_out = {{1, held}};
  bundle.group_factor = 1;

  bundle.pair_eligible = {1, 2, 3, 4};
  if (!cfg.pairs_fix_class) bundle.pair_eligible.insert(bundle.pair_eligible.begin(), 0);
  return bundle;
}

}  // namespace divrep::data
