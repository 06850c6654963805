#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace propseg {

/// Multi-class problems carry C one-hot mask channels and simplex-constrained
/// proportions; binary problems carry a single foreground channel and a single
/// unconstrained proportion in [0, 1].
enum class SegMode { multiclass, binary };

constexpr double kSimplexTolerance = 1e-6;
constexpr int kMinPatchDim = 8;

using PixelPlane = Eigen::MatrixXf;
using MaskPlane = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// One training/test image: 1 or 3 channel planes of identical size,
/// values in [0, 1]. Immutable by convention after construction.
struct ImagePatch {
  std::string id;
  std::vector<PixelPlane> channels;

  Eigen::Index rows() const { return channels.empty() ? 0 : channels.front().rows(); }
  Eigen::Index cols() const { return channels.empty() ? 0 : channels.front().cols(); }
  int channel_count() const { return static_cast<int>(channels.size()); }
};

/// Per-class binary maps. In multiclass mode every pixel is one-hot across
/// the C maps; in binary mode there is a single foreground map.
struct MaskStack {
  std::vector<MaskPlane> maps;
  SegMode mode = SegMode::multiclass;

  Eigen::Index rows() const { return maps.empty() ? 0 : maps.front().rows(); }
  Eigen::Index cols() const { return maps.empty() ? 0 : maps.front().cols(); }
  int class_count() const { return static_cast<int>(maps.size()); }
};

/// Semantic-proportion annotation: C values in [0, 1], summing to 1 in
/// multiclass mode.
struct ProportionVector {
  Eigen::VectorXd values;
  SegMode mode = SegMode::multiclass;

  int class_count() const { return static_cast<int>(values.size()); }
};

struct Keypoint {
  int row = 0;
  int col = 0;
  std::uint8_t value = 1;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
  friend auto operator<=>(const Keypoint& a, const Keypoint& b) {
    return std::tie(a.row, a.col, a.value) <=> std::tie(b.row, b.col, b.value);
  }
};

/// Sparse labelled pixels for one (image, class) pair.
struct KeypointAnnotation {
  std::string image_id;
  int class_index = 0;
  std::vector<Keypoint> points;
};

enum class Split { train, test };

/// The dataset container shared by all pipeline stages. Pixel data, masks and
/// annotations are immutable values; derived datasets are built by copying.
struct AnnotatedDataset {
  SegMode mode = SegMode::multiclass;
  std::vector<std::string> class_names;
  std::vector<ImagePatch> patches;
  std::map<std::string, ProportionVector> sp;
  std::vector<KeypointAnnotation> keypoints;
  std::map<std::string, MaskStack> gt_masks;
  std::map<std::string, Split> split;

  int class_count() const { return static_cast<int>(class_names.size()); }

  const ImagePatch* find_patch(const std::string& id) const {
    for (const auto& p : patches) {
      if (p.id == id) return &p;
    }
    return nullptr;
  }

  /// Ids of one split, in patch order (deterministic).
  std::vector<std::string> ids_in_split(Split s) const {
    std::vector<std::string> out;
    for (const auto& p : patches) {
      auto it = split.find(p.id);
      if (it != split.end() && it->second == s) out.push_back(p.id);
    }
    return out;
  }
};

// Validating factories. They throw std::invalid_argument on any invariant
// violation, so values built through them are well-formed by construction.
// Loaders that ingest untrusted files assemble plain structs instead and run
// validate_dataset() to *report* problems.
ImagePatch make_image_patch(std::string id, std::vector<PixelPlane> channels);
MaskStack make_mask_stack(std::vector<MaskPlane> maps, SegMode mode);
ProportionVector make_proportion_vector(Eigen::VectorXd values, SegMode mode);
KeypointAnnotation make_keypoint_annotation(std::string image_id, int class_index,
                                            std::vector<Keypoint> points);

/// One-hot expansion of a label grid (value = class index). Binary mode
/// expects labels in {0, 1} and produces a single-channel stack.
MaskStack mask_from_labels(const MaskPlane& labels, int n_classes, SegMode mode);
MaskPlane labels_from_mask(const MaskStack& mask);

struct Violation {
  std::string image_id;  // empty for dataset-level problems
  std::string rule;
  std::string message;
};

/// Non-throwing invariant audit across the whole dataset. Returns an empty
/// list iff every type- and cross-reference invariant holds.
std::vector<Violation> validate_dataset(const AnnotatedDataset& ds);

/// Deterministic seeded train/test assignment. |train| = round(fraction * n),
/// clamped so both splits are non-empty. Throws on fewer than 2 images.
AnnotatedDataset split_dataset(AnnotatedDataset ds, double train_fraction, std::uint64_t seed);

const char* to_string(SegMode mode);
SegMode seg_mode_from_string(const std::string& s);
const char* to_string(Split s);
Split split_from_string(const std::string& s);

}  // namespace propseg
