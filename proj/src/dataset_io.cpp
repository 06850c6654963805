#include "propseg/dataset_io.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "propseg/npy.hpp"

namespace propseg {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kManifestVersion = 1;

void require_safe_id(const std::string& id) {
  if (id.empty() || id.find_first_of("/\\ \t\n\r,") != std::string::npos) {
    throw std::invalid_argument("dataset io: image id not filesystem/CSV safe: '" + id + "'");
  }
}

NpyArray patch_to_npy(const ImagePatch& p) {
  NpyArray a;
  a.dtype = "<f4";
  a.shape = {static_cast<std::size_t>(p.channel_count()), static_cast<std::size_t>(p.rows()),
             static_cast<std::size_t>(p.cols())};
  a.data.resize(a.element_count() * 4);
  auto* out = reinterpret_cast<float*>(a.data.data());
  for (const auto& ch : p.channels) {
    for (Eigen::Index r = 0; r < ch.rows(); ++r) {
      for (Eigen::Index c = 0; c < ch.cols(); ++c) *out++ = ch(r, c);
    }
  }
  return a;
}

ImagePatch patch_from_npy(const std::string& id, const NpyArray& a) {
  if (a.dtype != "<f4" || a.shape.size() != 3) {
    throw std::runtime_error("dataset io: patch '" + id + "' must be float32 ch x M x H");
  }
  const auto ch_n = a.shape[0];
  const auto rows = static_cast<Eigen::Index>(a.shape[1]);
  const auto cols = static_cast<Eigen::Index>(a.shape[2]);
  const auto* in = reinterpret_cast<const float*>(a.data.data());
  std::vector<PixelPlane> channels;
  for (std::size_t k = 0; k < ch_n; ++k) {
    PixelPlane plane(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) plane(r, c) = *in++;
    }
    channels.push_back(std::move(plane));
  }
  return ImagePatch{id, std::move(channels)};
}

NpyArray mask_to_npy(const MaskStack& m) {
  const MaskPlane labels = labels_from_mask(m);
  NpyArray a;
  a.dtype = "|u1";
  a.shape = {static_cast<std::size_t>(labels.rows()), static_cast<std::size_t>(labels.cols())};
  a.data.resize(a.element_count());
  auto* out = a.data.data();
  for (Eigen::Index r = 0; r < labels.rows(); ++r) {
    for (Eigen::Index c = 0; c < labels.cols(); ++c) *out++ = labels(r, c);
  }
  return a;
}

MaskStack mask_from_npy(const std::string& id, const NpyArray& a, int n_classes, SegMode mode) {
  if (a.dtype != "|u1" || a.shape.size() != 2) {
    throw std::runtime_error("dataset io: mask '" + id + "' must be uint8 M x H");
  }
  MaskPlane labels(static_cast<Eigen::Index>(a.shape[0]), static_cast<Eigen::Index>(a.shape[1]));
  const auto* in = a.data.data();
  for (Eigen::Index r = 0; r < labels.rows(); ++r) {
    for (Eigen::Index c = 0; c < labels.cols(); ++c) labels(r, c) = *in++;
  }
  return mask_from_labels(labels, mode == SegMode::binary ? 1 : n_classes, mode);
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_sp_csv(const fs::path& path, const std::vector<std::string>& class_names,
                  const std::map<std::string, ProportionVector>& sp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write SP csv: " + path.string());
  out << "image_id";
  for (const auto& name : class_names) out << "," << name;
  out << "\n";
  for (const auto& [id, pv] : sp) {
    require_safe_id(id);
    if (pv.class_count() != static_cast<int>(class_names.size())) {
      throw std::invalid_argument("SP for '" + id + "' has wrong class count");
    }
    out << id;
    for (Eigen::Index j = 0; j < pv.values.size(); ++j) out << "," << format_double(pv.values[j]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::map<std::string, ProportionVector> read_sp_csv(const fs::path& path, SegMode mode,
                                                    int expected_classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read SP csv: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty SP csv: " + path.string());
  const auto header = split_csv_line(line);
  if (header.empty() || header.front() != "image_id") {
    throw std::runtime_error("SP csv missing image_id header: " + path.string());
  }
  const int n_classes = static_cast<int>(header.size()) - 1;
  if (expected_classes > 0 && n_classes != expected_classes) {
    throw std::runtime_error("SP csv declares " + std::to_string(n_classes) +
                             " classes, expected " + std::to_string(expected_classes));
  }

  std::map<std::string, ProportionVector> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != n_classes + 1) {
      throw std::runtime_error("SP csv row " + std::to_string(line_no) + " has wrong field count");
    }
    Eigen::VectorXd v(n_classes);
    for (int j = 0; j < n_classes; ++j) v[j] = std::stod(fields[static_cast<std::size_t>(j + 1)]);
    // plain struct, not the validating factory: degraded/noisy files are
    // allowed to carry out-of-spec rows that validate_dataset then reports
    out[fields[0]] = ProportionVector{std::move(v), mode};
  }
  return out;
}

void write_keypoint_csv(const fs::path& path, const std::vector<KeypointAnnotation>& keypoints) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write keypoint csv: " + path.string());
  out << "image_id,class_index,row,col,value\n";
  for (const auto& kp : keypoints) {
    require_safe_id(kp.image_id);
    for (const auto& pt : kp.points) {
      out << kp.image_id << "," << kp.class_index << "," << pt.row << "," << pt.col << ","
          << static_cast<int>(pt.value) << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<KeypointAnnotation> read_keypoint_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read keypoint csv: " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{
                                     "image_id", "class_index", "row", "col", "value"}) {
    throw std::runtime_error("keypoint csv has unexpected header: " + path.string());
  }

  std::vector<KeypointAnnotation> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) {
      throw std::runtime_error("keypoint csv row " + std::to_string(line_no) +
                               " has wrong field count");
    }
    const int cls = std::stoi(f[1]);
    const Keypoint pt{std::stoi(f[2]), std::stoi(f[3]), static_cast<std::uint8_t>(std::stoi(f[4]))};
    if (!out.empty() && out.back().image_id == f[0] && out.back().class_index == cls) {
      out.back().points.push_back(pt);
    } else {
      out.push_back(KeypointAnnotation{f[0], cls, {pt}});
    }
  }
  return out;
}

void save_dataset(const AnnotatedDataset& ds, const fs::path& dir, bool overwrite) {
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path) && !overwrite) {
    throw std::runtime_error("refusing to overwrite existing dataset: " + manifest_path.string());
  }
  fs::create_directories(dir / "patches");
  if (!ds.gt_masks.empty()) fs::create_directories(dir / "masks");

  json manifest;
  manifest["format_version"] = kManifestVersion;
  manifest["mode"] = to_string(ds.mode);
  manifest["class_names"] = ds.class_names;

  json patch_table = json::array();
  for (const auto& p : ds.patches) {
    require_safe_id(p.id);
    const std::string patch_rel = "patches/" + p.id + ".npy";
    save_npy(dir / patch_rel, patch_to_npy(p));

    json entry;
    entry["id"] = p.id;
    entry["image"] = patch_rel;
    if (auto it = ds.gt_masks.find(p.id); it != ds.gt_masks.end()) {
      const std::string mask_rel = "masks/" + p.id + ".npy";
      save_npy(dir / mask_rel, mask_to_npy(it->second));
      entry["mask"] = mask_rel;
    }
    if (auto it = ds.split.find(p.id); it != ds.split.end()) {
      entry["split"] = to_string(it->second);
    }
    patch_table.push_back(std::move(entry));
  }
  manifest["patches"] = std::move(patch_table);

  if (!ds.sp.empty()) {
    write_sp_csv(dir / "sp.csv", ds.class_names, ds.sp);
    manifest["sp_file"] = "sp.csv";
  }
  if (!ds.keypoints.empty()) {
    write_keypoint_csv(dir / "keypoints.csv", ds.keypoints);
    manifest["keypoint_file"] = "keypoints.csv";
  }

  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write manifest: " + manifest_path.string());
  out << manifest.dump(2) << "\n";
}

AnnotatedDataset load_dataset(const fs::path& manifest_or_dir) {
  fs::path manifest_path = manifest_or_dir;
  if (fs::is_directory(manifest_path)) manifest_path /= "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot read manifest: " + manifest_path.string());
  json manifest = json::parse(in);
  const fs::path dir = manifest_path.parent_path();

  AnnotatedDataset ds;
  ds.mode = seg_mode_from_string(manifest.at("mode").get<std::string>());
  ds.class_names = manifest.at("class_names").get<std::vector<std::string>>();

  for (const auto& entry : manifest.at("patches")) {
    const auto id = entry.at("id").get<std::string>();
    ds.patches.push_back(patch_from_npy(id, load_npy(dir / entry.at("image").get<std::string>())));
    if (entry.contains("mask")) {
      ds.gt_masks[id] = mask_from_npy(id, load_npy(dir / entry.at("mask").get<std::string>()),
                                      ds.class_count(), ds.mode);
    }
    if (entry.contains("split")) {
      ds.split[id] = split_from_string(entry.at("split").get<std::string>());
    }
  }

  if (manifest.contains("sp_file")) {
    ds.sp = read_sp_csv(dir / manifest.at("sp_file").get<std::string>(), ds.mode, ds.class_count());
  }
  if (manifest.contains("keypoint_file")) {
    ds.keypoints = read_keypoint_csv(dir / manifest.at("keypoint_file").get<std::string>());
  }

  const auto violations = validate_dataset(ds);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "loaded dataset is invalid (" << violations.size() << " problems), first: ["
        << violations.front().rule << "] " << violations.front().image_id << ": "
        << violations.front().message;
    throw std::runtime_error(msg.str());
  }
  return ds;
}

}  // namespace propseg
