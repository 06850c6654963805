#include "propseg/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "propseg/rng.hpp"

namespace propseg {

namespace {

void check(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool plane_in_unit_range(const PixelPlane& p) {
  return p.allFinite() && (p.array() >= 0.0f).all() && (p.array() <= 1.0f).all();
}

bool plane_is_binary(const MaskPlane& p) {
  return (p.array() <= 1).all();
}

}  // namespace

const char* to_string(SegMode mode) {
  return mode == SegMode::multiclass ? "multiclass" : "binary";
}

SegMode seg_mode_from_string(const std::string& s) {
  if (s == "multiclass") return SegMode::multiclass;
  if (s == "binary") return SegMode::binary;
  throw std::invalid_argument("unknown segmentation mode: " + s);
}

const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split: " + s);
}

ImagePatch make_image_patch(std::string id, std::vector<PixelPlane> channels) {
  check(!id.empty(), "ImagePatch: id must be non-empty");
  check(channels.size() == 1 || channels.size() == 3,
        "ImagePatch '" + id + "': channel count must be 1 or 3");
  const auto rows = channels.front().rows();
  const auto cols = channels.front().cols();
  check(rows >= kMinPatchDim && cols >= kMinPatchDim,
        "ImagePatch '" + id + "': dimensions must be at least 8x8");
  for (const auto& ch : channels) {
    check(ch.rows() == rows && ch.cols() == cols,
          "ImagePatch '" + id + "': channel shapes differ");
    check(plane_in_unit_range(ch), "ImagePatch '" + id + "': pixels outside [0,1] or non-finite");
  }
  return ImagePatch{std::move(id), std::move(channels)};
}

MaskStack make_mask_stack(std::vector<MaskPlane> maps, SegMode mode) {
  check(!maps.empty(), "MaskStack: needs at least one class map");
  const auto rows = maps.front().rows();
  const auto cols = maps.front().cols();
  for (const auto& m : maps) {
    check(m.rows() == rows && m.cols() == cols, "MaskStack: map shapes differ");
    check(plane_is_binary(m), "MaskStack: values must be 0 or 1");
  }
  if (mode == SegMode::binary) {
    check(maps.size() == 1, "MaskStack: binary mode requires exactly one map");
  } else {
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        int ones = 0;
        for (const auto& m : maps) ones += m(r, c);
        check(ones == 1, "MaskStack: multiclass pixel not one-hot at (" +
                             std::to_string(r) + "," + std::to_string(c) + ")");
      }
    }
  }
  return MaskStack{std::move(maps), mode};
}

ProportionVector make_proportion_vector(Eigen::VectorXd values, SegMode mode) {
  check(values.size() >= 1, "ProportionVector: needs at least one class");
  check(values.allFinite(), "ProportionVector: values must be finite");
  check((values.array() >= 0.0).all() && (values.array() <= 1.0).all(),
        "ProportionVector: values must lie in [0,1]");
  if (mode == SegMode::multiclass) {
    check(std::abs(values.sum() - 1.0) <= kSimplexTolerance,
          "ProportionVector: multiclass values must sum to 1");
  } else {
    check(values.size() == 1, "ProportionVector: binary mode carries one value");
  }
  return ProportionVector{std::move(values), mode};
}

KeypointAnnotation make_keypoint_annotation(std::string image_id, int class_index,
                                            std::vector<Keypoint> points) {
  check(!image_id.empty(), "KeypointAnnotation: image id must be non-empty");
  check(class_index >= 0, "KeypointAnnotation: class index must be non-negative");
  check(!points.empty(), "KeypointAnnotation: points must be non-empty");
  std::set<std::pair<int, int>> seen;
  for (const auto& p : points) {
    check(p.value <= 1, "KeypointAnnotation: point value must be 0 or 1");
    check(seen.emplace(p.row, p.col).second,
          "KeypointAnnotation '" + image_id + "': duplicate point (" +
              std::to_string(p.row) + "," + std::to_string(p.col) + ")");
  }
  return KeypointAnnotation{std::move(image_id), class_index, std::move(points)};
}

MaskStack mask_from_labels(const MaskPlane& labels, int n_classes, SegMode mode) {
  check(n_classes >= 1, "mask_from_labels: n_classes must be positive");
  if (mode == SegMode::binary) check(n_classes == 1, "mask_from_labels: binary means one class");
  std::vector<MaskPlane> maps;
  const int planes = mode == SegMode::binary ? 1 : n_classes;
  maps.reserve(static_cast<std::size_t>(planes));
  for (int j = 0; j < planes; ++j) {
    MaskPlane m(labels.rows(), labels.cols());
    for (Eigen::Index r = 0; r < labels.rows(); ++r) {
      for (Eigen::Index c = 0; c < labels.cols(); ++c) {
        const int lbl = labels(r, c);
        check(lbl < (mode == SegMode::binary ? 2 : n_classes),
              "mask_from_labels: label " + std::to_string(lbl) + " out of range");
        m(r, c) = static_cast<std::uint8_t>(mode == SegMode::binary ? lbl == 1 : lbl == j);
      }
    }
    maps.push_back(std::move(m));
  }
  return MaskStack{std::move(maps), mode};
}

MaskPlane labels_from_mask(const MaskStack& mask) {
  MaskPlane labels = MaskPlane::Zero(mask.rows(), mask.cols());
  for (int j = 0; j < mask.class_count(); ++j) {
    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
      for (Eigen::Index c = 0; c < mask.cols(); ++c) {
        if (mask.maps[static_cast<std::size_t>(j)](r, c)) labels(r, c) = static_cast<std::uint8_t>(j);
      }
    }
  }
  return labels;
}

std::vector<Violation> validate_dataset(const AnnotatedDataset& ds) {
  std::vector<Violation> out;
  const auto add = [&out](std::string id, std::string rule, std::string msg) {
    out.push_back(Violation{std::move(id), std::move(rule), std::move(msg)});
  };

  const int n_classes = ds.class_count();
  if (n_classes == 0) add("", "class_names", "dataset declares no classes");
  if (ds.mode == SegMode::binary && n_classes > 1) {
    add("", "class_names", "binary dataset must declare a single class");
  }

  std::set<std::string> ids;
  for (const auto& p : ds.patches) {
    if (p.id.empty()) add(p.id, "patch_id", "empty patch id");
    if (!ids.insert(p.id).second) add(p.id, "patch_id", "duplicate patch id");
    if (p.channel_count() != 1 && p.channel_count() != 3) {
      add(p.id, "patch_channels", "channel count must be 1 or 3");
    }
    if (p.rows() < kMinPatchDim || p.cols() < kMinPatchDim) {
      add(p.id, "patch_dims", "patch smaller than 8x8");
    }
    for (const auto& ch : p.channels) {
      if (ch.rows() != p.rows() || ch.cols() != p.cols()) {
        add(p.id, "patch_channels", "channel shapes differ");
        break;
      }
      if (!plane_in_unit_range(ch)) {
        add(p.id, "patch_range", "pixels outside [0,1] or non-finite");
        break;
      }
    }
  }

  for (const auto& [id, pv] : ds.sp) {
    if (ids.find(id) == ids.end()) add(id, "sp_reference", "SP entry for unknown image");
    if (pv.class_count() != n_classes) {
      add(id, "sp_shape", "SP has " + std::to_string(pv.class_count()) + " values, expected " +
                              std::to_string(n_classes));
      continue;
    }
    if (!pv.values.allFinite() || (pv.values.array() < 0.0).any() || (pv.values.array() > 1.0).any()) {
      add(id, "sp_range", "SP values must lie in [0,1]");
      continue;
    }
    if (ds.mode == SegMode::multiclass &&
        std::abs(pv.values.sum() - 1.0) > kSimplexTolerance) {
      std::ostringstream msg;
      msg << "SP sums to " << pv.values.sum() << ", expected 1";
      add(id, "simplex", msg.str());
    }
  }

  for (const auto& [id, mask] : ds.gt_masks) {
    const ImagePatch* p = ds.find_patch(id);
    if (p == nullptr) {
      add(id, "mask_reference", "mask for unknown image");
      continue;
    }
    if (mask.mode != ds.mode) add(id, "mask_mode", "mask mode differs from dataset mode");
    const int expected = ds.mode == SegMode::binary ? 1 : n_classes;
    if (mask.class_count() != expected) {
      add(id, "mask_shape", "mask class count differs from dataset classes");
      continue;
    }
    if (mask.rows() != p->rows() || mask.cols() != p->cols()) {
      add(id, "mask_shape", "mask dimensions differ from image");
      continue;
    }
    bool binary_ok = true;
    for (const auto& m : mask.maps) binary_ok = binary_ok && plane_is_binary(m);
    if (!binary_ok) {
      add(id, "mask_values", "mask values must be 0 or 1");
      continue;
    }
    if (ds.mode == SegMode::multiclass) {
      bool onehot = true;
      for (Eigen::Index r = 0; r < mask.rows() && onehot; ++r) {
        for (Eigen::Index c = 0; c < mask.cols() && onehot; ++c) {
          int ones = 0;
          for (const auto& m : mask.maps) ones += m(r, c);
          onehot = ones == 1;
        }
      }
      if (!onehot) add(id, "one_hot", "multiclass mask is not one-hot per pixel");
    }
  }

  std::set<std::pair<std::string, int>> kp_keys;
  for (const auto& kp : ds.keypoints) {
    if (!kp_keys.emplace(kp.image_id, kp.class_index).second) {
      add(kp.image_id, "keypoint_duplicate", "duplicate annotation for class " +
                                                 std::to_string(kp.class_index));
    }
    const ImagePatch* p = ds.find_patch(kp.image_id);
    if (p == nullptr) {
      add(kp.image_id, "keypoint_reference", "keypoints for unknown image");
      continue;
    }
    auto it = ds.split.find(kp.image_id);
    if (it == ds.split.end() || it->second != Split::train) {
      add(kp.image_id, "keypoint_split", "keypoints must annotate train images");
    }
    if (kp.class_index < 0 || kp.class_index >= n_classes) {
      add(kp.image_id, "keypoint_class", "class index out of range");
    }
    if (kp.points.empty()) add(kp.image_id, "keypoint_points", "no points in annotation");
    std::set<std::pair<int, int>> coords;
    for (const auto& pt : kp.points) {
      if (pt.row < 0 || pt.row >= p->rows() || pt.col < 0 || pt.col >= p->cols()) {
        add(kp.image_id, "keypoint_bounds",
            "point (" + std::to_string(pt.row) + "," + std::to_string(pt.col) + ") out of bounds");
      }
      if (!coords.emplace(pt.row, pt.col).second) {
        add(kp.image_id, "keypoint_points", "duplicate point coordinates");
      }
      if (pt.value > 1) add(kp.image_id, "keypoint_value", "point value must be 0 or 1");
    }
  }

  if (!ds.split.empty()) {
    for (const auto& [id, s] : ds.split) {
      (void)s;
      if (ids.find(id) == ids.end()) add(id, "split_reference", "split entry for unknown image");
    }
    for (const auto& p : ds.patches) {
      if (ds.split.find(p.id) == ds.split.end()) {
        add(p.id, "split_coverage", "image has no split assignment");
      }
    }
    // SPSS requirement: every train image carries an SP annotation.
    for (const auto& p : ds.patches) {
      auto it = ds.split.find(p.id);
      if (it != ds.split.end() && it->second == Split::train &&
          ds.sp.find(p.id) == ds.sp.end()) {
        add(p.id, "sp_coverage", "train image has no SP annotation");
      }
    }
  }

  return out;
}

AnnotatedDataset split_dataset(AnnotatedDataset ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_dataset: train_fraction must lie in (0,1)");
  }
  const int n = static_cast<int>(ds.patches.size());
  if (n < 2) {
    throw std::invalid_argument("split_dataset: need at least 2 images, got " + std::to_string(n));
  }

  std::vector<std::string> order;
  order.reserve(static_cast<std::size_t>(n));
  for (const auto& p : ds.patches) order.push_back(p.id);
  std::sort(order.begin(), order.end());

  Rng rng(seed);
  rng.shuffle(order);

  int n_train = static_cast<int>(std::llround(train_fraction * n));
  n_train = std::clamp(n_train, 1, n - 1);

  ds.split.clear();
  for (int i = 0; i < n; ++i) {
    ds.split[order[static_cast<std::size_t>(i)]] = i < n_train ? Split::train : Split::test;
  }
  return ds;
}

}  // namespace propseg
