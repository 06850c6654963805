#pragma once

#include <map>
#include <string>
#include <vector>

#include "propseg/conv.hpp"
#include "propseg/network.hpp"
#include "propseg/types.hpp"

namespace propseg {

struct LossConfig {
  double alpha = 0.5;        // trade-off between proportion and keypoint terms
  double bce_epsilon = 1e-7; // probability clip before logs
};

void validate_loss_config(const LossConfig& cfg);

/// Mean squared proportion error over a batch: (1/B) * sum_i ||target_i -
/// pred_i||^2. Columns are batch elements.
template <class T>
T loss_sp(const Mat<T>& pred, const Mat<T>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || pred.cols() == 0) {
    throw std::invalid_argument("loss_sp: prediction/target shapes differ or batch empty");
  }
  return (pred - target).squaredNorm() / static_cast<T>(pred.cols());
}

/// d loss_sp / d pred = 2 (pred - target) / B, per column.
template <class T>
Mat<T> loss_sp_grad(const Mat<T>& pred, const Mat<T>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || pred.cols() == 0) {
    throw std::invalid_argument("loss_sp_grad: prediction/target shapes differ or batch empty");
  }
  return T(2) / static_cast<T>(pred.cols()) * (pred - target);
}

/// Convenience overload on annotation types.
double loss_sp(const std::vector<ProportionVector>& pred,
               const std::vector<ProportionVector>& target);

/// Binary cross-entropy of one pixel; the prediction is clipped to
/// [eps, 1 - eps] before the logs.
template <class T>
T bce_pixel(T y_true, T y_pred, T eps) {
  const T p = std::clamp(y_pred, eps, T(1) - eps);
  return -(y_true * std::log(p) + (T(1) - y_true) * std::log(T(1) - p));
}

/// Derivative with respect to the prediction. Zero inside the clipped
/// saturation zones, (p - y) / (p (1 - p)) elsewhere.
template <class T>
T bce_pixel_grad(T y_true, T y_pred, T eps) {
  if (y_pred < eps || y_pred > T(1) - eps) return T(0);
  return (y_pred - y_true) / (y_pred * (T(1) - y_pred));
}

/// Keypoint loss: sum over annotated images and classes of the mean pixel BCE
/// inside each annotation. An empty annotation list contributes 0.
template <class T>
T loss_sk(const std::map<std::string, const ScoreMaps<T>*>& pred_maps,
          const std::vector<KeypointAnnotation>& keypoints, T eps) {
  T total = 0;
  for (const auto& kp : keypoints) {
    const auto it = pred_maps.find(kp.image_id);
    if (it == pred_maps.end()) {
      throw std::invalid_argument("loss_sk: no prediction for image '" + kp.image_id + "'");
    }
    const ScoreMaps<T>& maps = *it->second;
    if (kp.class_index < 0 || kp.class_index >= maps.class_count()) {
      throw std::invalid_argument("loss_sk: class index out of range for '" + kp.image_id + "'");
    }
    if (kp.points.empty()) continue;
    T sum = 0;
    for (const auto& pt : kp.points) {
      if (pt.row < 0 || pt.row >= maps.rows || pt.col < 0 || pt.col >= maps.cols) {
        throw std::invalid_argument("loss_sk: keypoint out of bounds for '" + kp.image_id + "'");
      }
      sum += bce_pixel(static_cast<T>(pt.value), maps.at(kp.class_index, pt.row, pt.col), eps);
    }
    total += sum / static_cast<T>(kp.points.size());
  }
  return total;
}

/// As loss_sk, also accumulating d loss / d maps into per-image gradient
/// matrices (shaped like ScoreMaps::values; missing entries are created
/// zero-filled).
template <class T>
T loss_sk_with_grad(const std::map<std::string, const ScoreMaps<T>*>& pred_maps,
                    const std::vector<KeypointAnnotation>& keypoints, T eps,
                    std::map<std::string, Mat<T>>& d_maps) {
  const T value = loss_sk(pred_maps, keypoints, eps);  // validates everything up front
  for (const auto& kp : keypoints) {
    const ScoreMaps<T>& maps = *pred_maps.at(kp.image_id);
    auto [it, inserted] = d_maps.try_emplace(kp.image_id);
    if (inserted) it->second = Mat<T>::Zero(maps.values.rows(), maps.values.cols());
    const T inv = T(1) / static_cast<T>(kp.points.size());
    for (const auto& pt : kp.points) {
      it->second(kp.class_index, pt.row * maps.cols + pt.col) +=
          inv * bce_pixel_grad(static_cast<T>(pt.value),
                               maps.at(kp.class_index, pt.row, pt.col), eps);
    }
  }
  return value;
}

/// alpha * L_sp + (1 - alpha) * L_sk.
template <class T>
T loss_total(T lsp, T lsk, const LossConfig& cfg) {
  validate_loss_config(cfg);
  if (!std::isfinite(static_cast<double>(lsp)) || !std::isfinite(static_cast<double>(lsk))) {
    throw std::invalid_argument("loss_total: inputs must be finite");
  }
  return static_cast<T>(cfg.alpha) * lsp + static_cast<T>(1.0 - cfg.alpha) * lsk;
}

/// Per-pixel cross-entropy of score maps against a one-hot mask (multiclass)
/// or per-pixel BCE against the foreground map (binary); mean over pixels.
/// Used by the fully-supervised benchmark trainer.
template <class T>
T cross_entropy_pixels(const ScoreMaps<T>& probs, const MaskStack& truth, T eps) {
  if (truth.rows() != probs.rows || truth.cols() != probs.cols ||
      truth.class_count() != probs.class_count()) {
    throw std::invalid_argument("cross_entropy_pixels: mask/score shapes differ");
  }
  const T inv_p = T(1) / static_cast<T>(probs.rows * probs.cols);
  T total = 0;
  if (truth.mode == SegMode::binary) {
    const MaskPlane& m = truth.maps.front();
    for (int r = 0; r < probs.rows; ++r) {
      for (int c = 0; c < probs.cols; ++c) {
        total += bce_pixel(static_cast<T>(m(r, c)), probs.at(0, r, c), eps);
      }
    }
  } else {
    for (int r = 0; r < probs.rows; ++r) {
      for (int c = 0; c < probs.cols; ++c) {
        for (int j = 0; j < truth.class_count(); ++j) {
          if (truth.maps[static_cast<std::size_t>(j)](r, c)) {
            total -= std::log(std::clamp(probs.at(j, r, c), eps, T(1) - eps));
            break;
          }
        }
      }
    }
  }
  return total * inv_p;
}

/// Gradient of cross_entropy_pixels with respect to the score maps.
template <class T>
Mat<T> cross_entropy_pixels_grad(const ScoreMaps<T>& probs, const MaskStack& truth, T eps) {
  if (truth.rows() != probs.rows || truth.cols() != probs.cols ||
      truth.class_count() != probs.class_count()) {
    throw std::invalid_argument("cross_entropy_pixels_grad: mask/score shapes differ");
  }
  const T inv_p = T(1) / static_cast<T>(probs.rows * probs.cols);
  Mat<T> d = Mat<T>::Zero(probs.values.rows(), probs.values.cols());
  if (truth.mode == SegMode::binary) {
    const MaskPlane& m = truth.maps.front();
    for (int r = 0; r < probs.rows; ++r) {
      for (int c = 0; c < probs.cols; ++c) {
        d(0, r * probs.cols + c) =
            inv_p * bce_pixel_grad(static_cast<T>(m(r, c)), probs.at(0, r, c), eps);
      }
    }
  } else {
    for (int r = 0; r < probs.rows; ++r) {
      for (int c = 0; c < probs.cols; ++c) {
        for (int j = 0; j < truth.class_count(); ++j) {
          if (truth.maps[static_cast<std::size_t>(j)](r, c)) {
            const T p = probs.at(j, r, c);
            if (p >= eps && p <= T(1) - eps) d(j, r * probs.cols + c) = -inv_p / p;
            break;
          }
        }
      }
    }
  }
  return d;
}

}  // namespace propseg
