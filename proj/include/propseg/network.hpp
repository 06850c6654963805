#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "propseg/conv.hpp"
#include "propseg/rng.hpp"
#include "propseg/types.hpp"

namespace propseg {

enum class HeadActivation { softmax_over_classes, sigmoid };

/// Encoder-decoder backbone layout: four contracting blocks (two 3x3
/// convolutions + ReLU, then 2x2 max-pool), widths doubling from
/// base_filters; four expansive blocks (stride-2 3x3 transpose convolution +
/// ReLU, skip concatenation, 3x3 convolution + ReLU), widths halving; a final
/// 1x1 convolution with n_out filters and the head activation. All
/// convolutions zero-pad so score maps match the input size.
struct BackboneConfig {
  int in_channels = 3;
  int n_out = 1;
  int base_filters = 64;
  static constexpr int depth = 4;
  HeadActivation head_activation = HeadActivation::softmax_over_classes;
};

/// Resolves the head: one output channel forces sigmoid (a single-channel
/// softmax is constantly one and cannot train), several force softmax.
BackboneConfig resolve_backbone_config(BackboneConfig cfg);

struct ParamEntry {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
};

struct ParamLayout {
  std::vector<ParamEntry> entries;
  Eigen::Index total = 0;

  const ParamEntry& at(const std::string& name) const;
};

ParamLayout backbone_layout(const BackboneConfig& cfg);

/// Per-class score maps produced by the network head: n_out x (M*H), one
/// column per pixel. Softmax heads are per-pixel simplex; sigmoid heads lie
/// in (0,1).
template <class T>
struct ScoreMaps {
  Mat<T> values;
  int rows = 0;
  int cols = 0;

  int class_count() const { return static_cast<int>(values.rows()); }
  T at(int cls, int m, int h) const { return values(cls, m * cols + h); }
};

/// Model parameters as one flat vector plus the layout table; checkpoints
/// round-trip this bit-exactly.
template <class T>
struct Backbone {
  BackboneConfig cfg;
  ParamLayout layout;
  Vec<T> params;
  std::int64_t step = 0;
  std::uint64_t seed = 0;

  Eigen::Map<Mat<T>> view(const ParamEntry& e) {
    return Eigen::Map<Mat<T>>(params.data() + e.offset, e.rows, e.cols);
  }
  Eigen::Map<const Mat<T>> view(const ParamEntry& e) const {
    return Eigen::Map<const Mat<T>>(params.data() + e.offset, e.rows, e.cols);
  }
  Eigen::Map<Mat<T>> view(const std::string& name) { return view(layout.at(name)); }
  Eigen::Map<const Mat<T>> view(const std::string& name) const { return view(layout.at(name)); }
};

/// Intermediate activations of one forward pass, kept for the backward pass.
/// Tied to the producing model by (step, param count); backward refuses a
/// trace from a different or since-updated model.
template <class T>
struct ForwardTrace {
  int in_rows = 0, in_cols = 0;      // original patch size
  int pad_rows = 0, pad_cols = 0;    // size after padding to a multiple of 16
  Fmap<T> input;
  std::array<Fmap<T>, 4> enc_a1, enc_a2, enc_pooled;
  std::array<ArgmaxGrid, 4> pool_arg;
  std::array<Fmap<T>, 4> dec_up, dec_cat, dec_out;
  Mat<T> probs;                      // n_out x padded pixels
  std::int64_t model_step = -1;
  Eigen::Index model_params = -1;
};

namespace net_detail {

inline int pad_to_16(int n) { return (n + 15) / 16 * 16; }

template <class T>
Fmap<T> patch_to_fmap(const ImagePatch& patch, int pad_rows, int pad_cols) {
  Fmap<T> f{Mat<T>::Zero(patch.channel_count(), pad_rows * pad_cols), pad_rows, pad_cols};
  for (int c = 0; c < patch.channel_count(); ++c) {
    const auto& plane = patch.channels[static_cast<std::size_t>(c)];
    for (Eigen::Index m = 0; m < plane.rows(); ++m) {
      for (Eigen::Index h = 0; h < plane.cols(); ++h) {
        f.v(c, static_cast<int>(m) * pad_cols + static_cast<int>(h)) = static_cast<T>(plane(m, h));
      }
    }
  }
  return f;
}

inline std::array<int, 4> encoder_widths(const BackboneConfig& cfg) {
  return {cfg.base_filters, 2 * cfg.base_filters, 4 * cfg.base_filters, 8 * cfg.base_filters};
}

}  // namespace net_detail

/// Builds a backbone with fan-in-scaled uniform weights and zero biases,
/// deterministically from the seed.
template <class T>
Backbone<T> build_backbone(const BackboneConfig& raw_cfg, std::uint64_t seed) {
  const BackboneConfig cfg = resolve_backbone_config(raw_cfg);
  Backbone<T> model{cfg, backbone_layout(cfg), Vec<T>::Zero(0), 0, seed};
  model.params = Vec<T>::Zero(model.layout.total);

  Rng rng(seed);
  for (const auto& e : model.layout.entries) {
    auto block = model.view(e);
    if (e.name.ends_with(".b")) {
      block.setZero();
      continue;
    }
    // fan-in: kernel taps times input channels
    Eigen::Index fan_in;
    if (e.name.starts_with("dec") && e.name.find("tconv") != std::string::npos) {
      fan_in = e.rows * 9;  // stored (in_c x 9*out_c)
    } else {
      fan_in = e.cols;  // conv weights are (out_c x taps*in_c)
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
      for (Eigen::Index i = 0; i < block.rows(); ++i) {
        block(i, j) = static_cast<T>(rng.uniform(-limit, limit));
      }
    }
  }
  return model;
}

/// Forward pass recording every intermediate needed for gradients.
template <class T>
ScoreMaps<T> forward_traced(const Backbone<T>& model, const ImagePatch& patch,
                            ForwardTrace<T>& trace) {
  const BackboneConfig& cfg = model.cfg;
  if (patch.channel_count() != cfg.in_channels) {
    throw std::invalid_argument("forward: patch has " + std::to_string(patch.channel_count()) +
                                " channels, model expects " + std::to_string(cfg.in_channels));
  }
  if (patch.rows() < kMinPatchDim || patch.cols() < kMinPatchDim) {
    throw std::invalid_argument("forward: patch smaller than 8x8");
  }

  trace.in_rows = static_cast<int>(patch.rows());
  trace.in_cols = static_cast<int>(patch.cols());
  trace.pad_rows = net_detail::pad_to_16(trace.in_rows);
  trace.pad_cols = net_detail::pad_to_16(trace.in_cols);
  trace.input = net_detail::patch_to_fmap<T>(patch, trace.pad_rows, trace.pad_cols);
  trace.model_step = model.step;
  trace.model_params = model.params.size();

  const Fmap<T>* x = &trace.input;
  for (int i = 0; i < 4; ++i) {
    const std::string p = "enc" + std::to_string(i);
    trace.enc_a1[i] = conv3x3_forward<T>(model.view(p + ".conv1.w"), model.view(p + ".conv1.b"), *x);
    relu_inplace(trace.enc_a1[i].v);
    trace.enc_a2[i] =
        conv3x3_forward<T>(model.view(p + ".conv2.w"), model.view(p + ".conv2.b"), trace.enc_a1[i]);
    relu_inplace(trace.enc_a2[i].v);
    trace.enc_pooled[i] = maxpool2_forward(trace.enc_a2[i], trace.pool_arg[i]);
    x = &trace.enc_pooled[i];
  }

  for (int j = 0; j < 4; ++j) {
    const std::string p = "dec" + std::to_string(j);
    const int skip = 3 - j;
    trace.dec_up[j] = tconv3x3s2_forward<T>(model.view(p + ".tconv.w"), model.view(p + ".tconv.b"), *x);
    relu_inplace(trace.dec_up[j].v);

    const Fmap<T>& s = trace.enc_a2[skip];
    Fmap<T>& cat = trace.dec_cat[j];
    cat.rows = trace.dec_up[j].rows;
    cat.cols = trace.dec_up[j].cols;
    cat.v.resize(trace.dec_up[j].channels() + s.channels(), trace.dec_up[j].pixels());
    cat.v.topRows(trace.dec_up[j].channels()) = trace.dec_up[j].v;
    cat.v.bottomRows(s.channels()) = s.v;

    trace.dec_out[j] = conv3x3_forward<T>(model.view(p + ".conv.w"), model.view(p + ".conv.b"), cat);
    relu_inplace(trace.dec_out[j].v);
    x = &trace.dec_out[j];
  }

  Fmap<T> logits = conv1x1_forward<T>(model.view("head.w"), model.view("head.b"), *x);
  if (cfg.head_activation == HeadActivation::softmax_over_classes) {
    softmax_channels_inplace(logits.v);
  } else {
    sigmoid_inplace(logits.v);
  }
  trace.probs = std::move(logits.v);

  // crop padding back to the patch size
  ScoreMaps<T> maps;
  maps.rows = trace.in_rows;
  maps.cols = trace.in_cols;
  maps.values.resize(cfg.n_out, trace.in_rows * trace.in_cols);
  for (int m = 0; m < trace.in_rows; ++m) {
    maps.values.block(0, m * trace.in_cols, cfg.n_out, trace.in_cols) =
        trace.probs.block(0, m * trace.pad_cols, cfg.n_out, trace.in_cols);
  }
  return maps;
}

/// Pure forward evaluation.
template <class T>
ScoreMaps<T> forward(const Backbone<T>& model, const ImagePatch& patch) {
  ForwardTrace<T> trace;
  return forward_traced(model, patch, trace);
}

template <class T>
std::vector<ScoreMaps<T>> forward(const Backbone<T>& model, const std::vector<ImagePatch>& batch) {
  std::vector<ScoreMaps<T>> out;
  out.reserve(batch.size());
  for (const auto& p : batch) out.push_back(forward(model, p));
  return out;
}

/// Exact gradient of a scalar loss with respect to every parameter, given
/// dL/d(score maps) on the un-padded patch grid. The returned vector shares
/// the parameter layout.
template <class T>
Vec<T> backward(const Backbone<T>& model, const ForwardTrace<T>& trace, const Mat<T>& d_maps) {
  if (trace.model_step != model.step || trace.model_params != model.params.size()) {
    throw std::invalid_argument("backward: trace does not belong to this model state");
  }
  if (d_maps.rows() != model.cfg.n_out ||
      d_maps.cols() != static_cast<Eigen::Index>(trace.in_rows) * trace.in_cols) {
    throw std::invalid_argument("backward: gradient shape does not match score maps");
  }

  Vec<T> grads = Vec<T>::Zero(model.layout.total);
  const auto gview = [&](const std::string& name) {
    const ParamEntry& e = model.layout.at(name);
    return Eigen::Map<Mat<T>>(grads.data() + e.offset, e.rows, e.cols);
  };

  // un-crop: embed the gradient into the padded grid
  Mat<T> d_probs = Mat<T>::Zero(model.cfg.n_out, trace.pad_rows * trace.pad_cols);
  for (int m = 0; m < trace.in_rows; ++m) {
    d_probs.block(0, m * trace.pad_cols, model.cfg.n_out, trace.in_cols) =
        d_maps.block(0, m * trace.in_cols, model.cfg.n_out, trace.in_cols);
  }

  Mat<T> d_logits = model.cfg.head_activation == HeadActivation::softmax_over_classes
                        ? softmax_backward(trace.probs, d_probs)
                        : sigmoid_backward(trace.probs, d_probs);

  Mat<T> d_w;
  Vec<T> d_b;
  Fmap<T> d_x;
  {
    conv1x1_backward<T>(model.view("head.w"), trace.dec_out[3], d_logits, d_w, d_b, &d_x);
    gview("head.w") = d_w;
    gview("head.b") = d_b;
  }

  std::array<Fmap<T>, 4> d_skip;  // gradient flowing into enc_a2 via concatenation
  for (int j = 3; j >= 0; --j) {
    const std::string p = "dec" + std::to_string(j);
    const int skip = 3 - j;

    Mat<T> d_y = relu_backward(trace.dec_out[j].v, d_x.v);
    Fmap<T> d_cat;
    conv3x3_backward<T>(model.view(p + ".conv.w"), trace.dec_cat[j], d_y, d_w, d_b, &d_cat);
    gview(p + ".conv.w") = d_w;
    gview(p + ".conv.b") = d_b;

    const int up_c = trace.dec_up[j].channels();
    d_skip[skip].rows = trace.dec_cat[j].rows;
    d_skip[skip].cols = trace.dec_cat[j].cols;
    d_skip[skip].v = d_cat.v.bottomRows(d_cat.v.rows() - up_c);

    Fmap<T> d_up{d_cat.v.topRows(up_c), trace.dec_up[j].rows, trace.dec_up[j].cols};
    d_up.v = relu_backward(trace.dec_up[j].v, d_up.v);

    const Fmap<T>& tconv_in = j == 0 ? trace.enc_pooled[3] : trace.dec_out[j - 1];
    Fmap<T> d_out_wrap{std::move(d_up.v), trace.dec_up[j].rows, trace.dec_up[j].cols};
    tconv3x3s2_backward<T>(model.view(p + ".tconv.w"), tconv_in, d_out_wrap, d_w, d_b, &d_x);
    gview(p + ".tconv.w") = d_w;
    gview(p + ".tconv.b") = d_b;
  }

  // d_x now holds the gradient with respect to enc_pooled[3]
  for (int i = 3; i >= 0; --i) {
    const std::string p = "enc" + std::to_string(i);
    Fmap<T> d_a2{Mat<T>(), trace.enc_a2[i].rows, trace.enc_a2[i].cols};
    maxpool2_backward(d_x.v, trace.pool_arg[i], d_a2);
    d_a2.v += d_skip[i].v;
    d_a2.v = relu_backward(trace.enc_a2[i].v, d_a2.v);

    Fmap<T> d_a1;
    conv3x3_backward<T>(model.view(p + ".conv2.w"), trace.enc_a1[i], d_a2.v, d_w, d_b, &d_a1);
    gview(p + ".conv2.w") = d_w;
    gview(p + ".conv2.b") = d_b;

    d_a1.v = relu_backward(trace.enc_a1[i].v, d_a1.v);
    const Fmap<T>& conv1_in = i == 0 ? trace.input : trace.enc_pooled[i - 1];
    conv3x3_backward<T>(model.view(p + ".conv1.w"), conv1_in, d_a1.v, d_w, d_b,
                        i == 0 ? nullptr : &d_x);
    gview(p + ".conv1.w") = d_w;
    gview(p + ".conv1.b") = d_b;
  }
  return grads;
}

/// Global average pooling: the mean of each class map. Accumulated in double
/// so the result is stable regardless of map size.
template <class T>
Vec<T> gap_vector(const ScoreMaps<T>& maps) {
  Eigen::VectorXd acc = maps.values.template cast<double>().rowwise().mean();
  return acc.cast<T>();
}

template <class T>
ProportionVector gap(const ScoreMaps<T>& maps) {
  Eigen::VectorXd values = maps.values.template cast<double>().rowwise().mean();
  const SegMode mode = maps.class_count() == 1 ? SegMode::binary : SegMode::multiclass;
  return ProportionVector{std::move(values), mode};
}

/// Argmax decode for multi-channel maps; ties resolve to the lower class.
template <class T>
MaskStack predict_masks_argmax(const ScoreMaps<T>& maps) {
  if (maps.class_count() < 2) {
    throw std::invalid_argument("predict_masks_argmax: needs at least 2 channels");
  }
  std::vector<MaskPlane> planes(static_cast<std::size_t>(maps.class_count()));
  for (auto& p : planes) p = MaskPlane::Zero(maps.rows, maps.cols);
  for (int m = 0; m < maps.rows; ++m) {
    for (int h = 0; h < maps.cols; ++h) {
      Eigen::Index best;
      maps.values.col(m * maps.cols + h).maxCoeff(&best);
      planes[static_cast<std::size_t>(best)](m, h) = 1;
    }
  }
  return MaskStack{std::move(planes), SegMode::multiclass};
}

/// Threshold decode for single-channel maps; score == threshold maps to
/// foreground.
template <class T>
MaskStack predict_masks_threshold(const ScoreMaps<T>& maps, T threshold) {
  if (maps.class_count() != 1) {
    throw std::invalid_argument("predict_masks_threshold: needs exactly 1 channel");
  }
  MaskPlane plane(maps.rows, maps.cols);
  for (int m = 0; m < maps.rows; ++m) {
    for (int h = 0; h < maps.cols; ++h) {
      plane(m, h) = maps.values(0, m * maps.cols + h) >= threshold ? 1 : 0;
    }
  }
  return MaskStack{{std::move(plane)}, SegMode::binary};
}

const char* to_string(HeadActivation head);
HeadActivation head_from_string(const std::string& s);

/// Versioned checkpoint: magic, scalar width, seed/step, config JSON, raw
/// little-endian parameters. Bit-exact round trip.
void save_checkpoint(const std::filesystem::path& path, const Backbone<float>& model);
void save_checkpoint(const std::filesystem::path& path, const Backbone<double>& model);
Backbone<float> load_checkpoint_f32(const std::filesystem::path& path);
Backbone<double> load_checkpoint_f64(const std::filesystem::path& path);
/// Scalar width recorded in the checkpoint (4 or 8 bytes).
int checkpoint_scalar_width(const std::filesystem::path& path);

}  // namespace propseg
