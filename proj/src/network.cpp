#include "propseg/network.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace propseg {

namespace {

using json = nlohmann::ordered_json;

constexpr char kCheckpointMagic[8] = {'P', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

void add_entry(ParamLayout& layout, std::string name, Eigen::Index rows, Eigen::Index cols) {
  layout.entries.push_back(ParamEntry{std::move(name), layout.total, rows, cols});
  layout.total += rows * cols;
}

json config_to_json(const BackboneConfig& cfg) {
  json j;
  j["in_channels"] = cfg.in_channels;
  j["n_out"] = cfg.n_out;
  j["base_filters"] = cfg.base_filters;
  j["depth"] = BackboneConfig::depth;
  j["head_activation"] = to_string(cfg.head_activation);
  // recorded interpretation of the expansive blocks, for checkpoint audits
  j["expansive_block"] = "tconv3x3_s2 + relu, skip concat, conv3x3 + relu";
  return j;
}

BackboneConfig config_from_json(const json& j) {
  BackboneConfig cfg;
  cfg.in_channels = j.at("in_channels").get<int>();
  cfg.n_out = j.at("n_out").get<int>();
  cfg.base_filters = j.at("base_filters").get<int>();
  cfg.head_activation = head_from_string(j.at("head_activation").get<std::string>());
  return cfg;
}

template <class T>
void save_checkpoint_impl(const std::filesystem::path& path, const Backbone<T>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());

  out.write(kCheckpointMagic, 8);
  const auto write_u32 = [&out](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  };
  const auto write_u64 = [&out](std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  };
  write_u32(kCheckpointVersion);
  write_u32(static_cast<std::uint32_t>(sizeof(T)));
  write_u64(model.seed);
  write_u64(static_cast<std::uint64_t>(model.step));

  const std::string cfg = config_to_json(model.cfg).dump();
  write_u32(static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

  write_u64(static_cast<std::uint64_t>(model.params.size()));
  out.write(reinterpret_cast<const char*>(model.params.data()),
            static_cast<std::streamsize>(model.params.size() * sizeof(T)));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

template <class T>
Backbone<T> load_checkpoint_impl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());

  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const auto read_u32 = [&in]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  const auto read_u64 = [&in]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  if (read_u32() != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version: " + path.string());
  }
  if (read_u32() != sizeof(T)) {
    throw std::runtime_error("checkpoint scalar width mismatch: " + path.string());
  }

  Backbone<T> model;
  model.seed = read_u64();
  model.step = static_cast<std::int64_t>(read_u64());

  const std::uint32_t cfg_len = read_u32();
  std::string cfg_str(cfg_len, '\0');
  in.read(cfg_str.data(), cfg_len);
  model.cfg = config_from_json(json::parse(cfg_str));
  model.layout = backbone_layout(model.cfg);

  const auto n = static_cast<Eigen::Index>(read_u64());
  if (n != model.layout.total) {
    throw std::runtime_error("checkpoint parameter count does not match its config: " +
                             path.string());
  }
  model.params.resize(n);
  in.read(reinterpret_cast<char*>(model.params.data()),
          static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path.string());
  return model;
}

}  // namespace

const char* to_string(HeadActivation head) {
  return head == HeadActivation::softmax_over_classes ? "softmax_over_classes" : "sigmoid";
}

HeadActivation head_from_string(const std::string& s) {
  if (s == "softmax_over_classes") return HeadActivation::softmax_over_classes;
  if (s == "sigmoid") return HeadActivation::sigmoid;
  throw std::invalid_argument("unknown head activation: " + s);
}

BackboneConfig resolve_backbone_config(BackboneConfig cfg) {
  if (cfg.in_channels != 1 && cfg.in_channels != 3) {
    throw std::invalid_argument("backbone: in_channels must be 1 or 3");
  }
  if (cfg.n_out < 1) throw std::invalid_argument("backbone: n_out must be at least 1");
  if (cfg.base_filters < 4) throw std::invalid_argument("backbone: base_filters must be at least 4");
  cfg.head_activation =
      cfg.n_out == 1 ? HeadActivation::sigmoid : HeadActivation::softmax_over_classes;
  return cfg;
}

const ParamEntry& ParamLayout::at(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw std::invalid_argument("unknown parameter: " + name);
}

ParamLayout backbone_layout(const BackboneConfig& cfg) {
  ParamLayout layout;
  const auto widths = net_detail::encoder_widths(cfg);

  int in_c = cfg.in_channels;
  for (int i = 0; i < 4; ++i) {
    const std::string p = "enc" + std::to_string(i);
    add_entry(layout, p + ".conv1.w", widths[i], 9 * in_c);
    add_entry(layout, p + ".conv1.b", widths[i], 1);
    add_entry(layout, p + ".conv2.w", widths[i], 9 * widths[i]);
    add_entry(layout, p + ".conv2.b", widths[i], 1);
    in_c = widths[i];
  }

  int carried = widths[3];  // pooled deepest encoder output
  for (int j = 0; j < 4; ++j) {
    const std::string p = "dec" + std::to_string(j);
    const int skip_w = widths[3 - j];
    add_entry(layout, p + ".tconv.w", carried, 9 * skip_w);  // (in_c x 9*out_c)
    add_entry(layout, p + ".tconv.b", skip_w, 1);
    add_entry(layout, p + ".conv.w", skip_w, 9 * 2 * skip_w);
    add_entry(layout, p + ".conv.b", skip_w, 1);
    carried = skip_w;
  }

  add_entry(layout, "head.w", cfg.n_out, widths[0]);
  add_entry(layout, "head.b", cfg.n_out, 1);
  return layout;
}

void save_checkpoint(const std::filesystem::path& path, const Backbone<float>& model) {
  save_checkpoint_impl(path, model);
}
void save_checkpoint(const std::filesystem::path& path, const Backbone<double>& model) {
  save_checkpoint_impl(path, model);
}
Backbone<float> load_checkpoint_f32(const std::filesystem::path& path) {
  return load_checkpoint_impl<float>(path);
}
Backbone<double> load_checkpoint_f64(const std::filesystem::path& path) {
  return load_checkpoint_impl<double>(path);
}

int checkpoint_scalar_width(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  std::uint32_t version = 0, width = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&width), 4);
  return static_cast<int>(width);
}

}  // namespace propseg
