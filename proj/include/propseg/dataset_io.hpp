#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "propseg/types.hpp"

namespace propseg {

/// Writes a dataset directory:
///   manifest.json         (mode, class names, splits, file table)
///   patches/<id>.npy      (float32, ch x M x H)
///   masks/<id>.npy        (uint8 label grid M x H, when ground truth exists)
///   sp.csv                (when SP annotations exist)
///   keypoints.csv         (when keypoint annotations exist)
/// Refuses to clobber an existing manifest unless overwrite is set.
void save_dataset(const AnnotatedDataset& ds, const std::filesystem::path& dir,
                  bool overwrite = false);

/// Loads a dataset from a directory or a manifest.json path. The result is
/// validated; a list of violations is an error.
AnnotatedDataset load_dataset(const std::filesystem::path& manifest_or_dir);

/// SP CSV: header "image_id,<class_0>,...". Values round-trip exactly
/// (printed with max_digits10 precision). Rows sorted by image id.
void write_sp_csv(const std::filesystem::path& path,
                  const std::vector<std::string>& class_names,
                  const std::map<std::string, ProportionVector>& sp);
std::map<std::string, ProportionVector> read_sp_csv(const std::filesystem::path& path,
                                                    SegMode mode, int expected_classes);

/// Keypoint CSV: header "image_id,class_index,row,col,value", one point per
/// row, grouped per annotation in a stable order.
void write_keypoint_csv(const std::filesystem::path& path,
                        const std::vector<KeypointAnnotation>& keypoints);
std::vector<KeypointAnnotation> read_keypoint_csv(const std::filesystem::path& path);

}  // namespace propseg
