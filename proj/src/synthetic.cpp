#include "propseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "propseg/proportions.hpp"
#include "propseg/rng.hpp"

namespace propseg {

namespace {

constexpr int kPlacementRetries = 64;

struct Rgb {
  float r, g, b;
};

// background first, then well-separated hues for the shape classes
Rgb class_color(int cls) {
  static const Rgb palette[] = {
      {0.16f, 0.16f, 0.18f}, {0.82f, 0.26f, 0.22f}, {0.22f, 0.72f, 0.30f},
      {0.25f, 0.38f, 0.86f}, {0.88f, 0.80f, 0.24f}, {0.70f, 0.30f, 0.80f},
      {0.25f, 0.78f, 0.78f}, {0.90f, 0.55f, 0.20f},
  };
  constexpr int n = static_cast<int>(sizeof(palette) / sizeof(palette[0]));
  if (cls < n) return palette[cls];
  const float hue = std::fmod(0.61803398875f * static_cast<float>(cls), 1.0f);
  return Rgb{0.3f + 0.5f * hue, 0.9f - 0.6f * hue, 0.4f + 0.4f * std::fabs(hue - 0.5f)};
}

struct Shape {
  bool is_disc;
  int row, col, radius;

  bool contains(int r, int c) const {
    if (is_disc) {
      const int dr = r - row;
      const int dc = c - col;
      return dr * dr + dc * dc <= radius * radius;
    }
    return std::abs(r - row) <= radius && std::abs(c - col) <= radius;
  }
};

std::vector<std::pair<int, int>> rasterize(const Shape& s, int rows, int cols) {
  std::vector<std::pair<int, int>> px;
  for (int r = std::max(0, s.row - s.radius); r <= std::min(rows - 1, s.row + s.radius); ++r) {
    for (int c = std::max(0, s.col - s.radius); c <= std::min(cols - 1, s.col + s.radius); ++c) {
      if (s.contains(r, c)) px.emplace_back(r, c);
    }
  }
  return px;
}

void check_spec(const SyntheticSpec& spec) {
  if (spec.n_images < 1) throw std::invalid_argument("synthetic: n_images must be positive");
  if (spec.rows < 16 || spec.cols < 16) {
    throw std::invalid_argument("synthetic: dimensions must be at least 16");
  }
  if (spec.mode == SegMode::multiclass && spec.n_classes < 2) {
    throw std::invalid_argument("synthetic: multiclass needs at least 2 classes");
  }
  if (spec.min_radius < 1 || spec.max_radius < spec.min_radius) {
    throw std::invalid_argument("synthetic: bad radius range");
  }
  if (2 * spec.max_radius >= std::min(spec.rows, spec.cols)) {
    throw std::invalid_argument("synthetic: max_radius too large for the image size");
  }
  if (spec.min_shapes < 1 || spec.max_shapes < spec.min_shapes) {
    throw std::invalid_argument("synthetic: bad shape count range");
  }
  if (spec.imbalance_ratio && (*spec.imbalance_ratio <= 0.0 || *spec.imbalance_ratio > 1.0)) {
    throw std::invalid_argument("synthetic: imbalance_ratio must lie in (0,1]");
  }
}

}  // namespace

AnnotatedDataset generate_synthetic(const SyntheticSpec& spec) {
  check_spec(spec);

  AnnotatedDataset ds;
  ds.mode = spec.mode;
  if (spec.mode == SegMode::binary) {
    ds.class_names = {"foreground"};
  } else {
    ds.class_names.push_back("background");
    for (int j = 1; j < spec.n_classes; ++j) ds.class_names.push_back("class" + std::to_string(j));
  }

  const int fg_classes = spec.mode == SegMode::binary ? 1 : spec.n_classes - 1;
  const long total_px = static_cast<long>(spec.rows) * spec.cols;
  const long fg_budget =
      spec.imbalance_ratio
          ? static_cast<long>(std::floor(*spec.imbalance_ratio * static_cast<double>(total_px)))
          : total_px;

  char id_buf[32];
  for (int img = 0; img < spec.n_images; ++img) {
    Rng rng(Rng::derive(spec.seed, static_cast<std::uint64_t>(img)));

    MaskPlane labels = MaskPlane::Zero(spec.rows, spec.cols);
    std::vector<std::pair<Shape, int>> placed;  // shape, class
    long fg_used = 0;

    for (int fc = 0; fc < fg_classes; ++fc) {
      const int cls = spec.mode == SegMode::binary ? 1 : fc + 1;
      const bool disc_family = cls % 2 == 1;  // classes alternate disc / rectangle
      const int n_shapes = spec.min_shapes + rng.uniform_int(spec.max_shapes - spec.min_shapes + 1);

      for (int s = 0; s < n_shapes; ++s) {
        bool ok = false;
        for (int attempt = 0; attempt < kPlacementRetries && !ok; ++attempt) {
          int radius = spec.min_radius + rng.uniform_int(spec.max_radius - spec.min_radius + 1);
          Shape shape{disc_family, radius + rng.uniform_int(spec.rows - 2 * radius),
                      radius + rng.uniform_int(spec.cols - 2 * radius), radius};
          auto px = rasterize(shape, spec.rows, spec.cols);

          if (fg_used + static_cast<long>(px.size()) > fg_budget) continue;
          bool overlap = false;
          for (const auto& [r, c] : px) {
            if (labels(r, c) != 0) {
              overlap = true;
              break;
            }
          }
          if (overlap) continue;

          for (const auto& [r, c] : px) labels(r, c) = static_cast<std::uint8_t>(cls);
          fg_used += static_cast<long>(px.size());
          placed.emplace_back(shape, cls);
          ok = true;
        }
        if (!ok && s < spec.min_shapes) {
          throw std::runtime_error(
              "synthetic: could not place the required shapes (image " + std::to_string(img) +
              "); relax radius/count ranges or the imbalance ratio");
        }
        if (!ok) break;  // optional extra shape did not fit; move on
      }
    }

    // render pixels
    std::vector<PixelPlane> channels;
    if (spec.mode == SegMode::binary) {
      PixelPlane plane(spec.rows, spec.cols);
      for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
          const double base = labels(r, c) ? spec.fg_level : spec.bg_level;
          plane(r, c) = static_cast<float>(
              std::clamp(base + rng.normal(spec.pixel_noise), 0.0, 1.0));
        }
      }
      channels.push_back(std::move(plane));
    } else {
      // one brightness offset per placed shape so instances are not identical
      std::vector<float> shape_offset;
      shape_offset.reserve(placed.size());
      for (std::size_t i = 0; i < placed.size(); ++i) {
        shape_offset.push_back(static_cast<float>(rng.uniform(-spec.shape_jitter, spec.shape_jitter)));
      }
      Eigen::MatrixXf offset = Eigen::MatrixXf::Zero(spec.rows, spec.cols);
      for (std::size_t i = 0; i < placed.size(); ++i) {
        for (const auto& [r, c] : rasterize(placed[i].first, spec.rows, spec.cols)) {
          offset(r, c) = shape_offset[i];
        }
      }

      for (int ch = 0; ch < 3; ++ch) {
        PixelPlane plane(spec.rows, spec.cols);
        for (int r = 0; r < spec.rows; ++r) {
          for (int c = 0; c < spec.cols; ++c) {
            const Rgb color = class_color(labels(r, c));
            const double base = (ch == 0 ? color.r : ch == 1 ? color.g : color.b) + offset(r, c);
            plane(r, c) = static_cast<float>(
                std::clamp(base + rng.normal(spec.pixel_noise), 0.0, 1.0));
          }
        }
        channels.push_back(std::move(plane));
      }
    }

    std::snprintf(id_buf, sizeof(id_buf), "syn_%05d", img);
    const std::string id(id_buf);
    ds.patches.push_back(make_image_patch(id, std::move(channels)));
    MaskStack mask = mask_from_labels(labels, ds.class_count(), spec.mode);
    ds.sp[id] = extract_sp(mask);
    ds.gt_masks[id] = std::move(mask);
  }
  return ds;
}

}  // namespace propseg
