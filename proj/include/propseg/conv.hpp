#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace propseg {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Dense feature map: one column per pixel (pixel p = m * cols + h), one row
/// per channel, so a pixel's channel vector is contiguous in memory and
/// convolutions reduce to GEMMs on gathered columns.
template <class T>
struct Fmap {
  Mat<T> v;
  int rows = 0;
  int cols = 0;

  int channels() const { return static_cast<int>(v.rows()); }
  int pixels() const { return rows * cols; }
};

namespace conv_detail {

/// 3x3, stride 1, zero padding 1. col is (9*C) x P; column p stacks the nine
/// neighbour pixel channel vectors in kernel order k = km*3 + kh.
template <class T>
void im2col_3x3(const Fmap<T>& in, Mat<T>& col) {
  const int C = in.channels();
  col.setZero(9 * C, in.pixels());
  for (int km = 0; km < 3; ++km) {
    for (int kh = 0; kh < 3; ++kh) {
      const int k = km * 3 + kh;
      for (int m = 0; m < in.rows; ++m) {
        const int sm = m + km - 1;
        if (sm < 0 || sm >= in.rows) continue;
        // contiguous run over h where sh = h + kh - 1 stays in range
        const int h0 = std::max(0, 1 - kh);
        const int h1 = in.cols - 1 - std::max(0, kh - 1);
        if (h1 < h0) continue;
        const int n = h1 - h0 + 1;
        col.block(k * C, m * in.cols + h0, C, n) =
            in.v.block(0, sm * in.cols + (h0 + kh - 1), C, n);
      }
    }
  }
}

/// Adjoint of im2col_3x3: scatters the 9*C x P gradient back onto a C x P map.
template <class T>
void col2im_3x3(const Mat<T>& col, Fmap<T>& out) {
  const int C = static_cast<int>(col.rows()) / 9;
  out.v.setZero(C, out.rows * out.cols);
  for (int km = 0; km < 3; ++km) {
    for (int kh = 0; kh < 3; ++kh) {
      const int k = km * 3 + kh;
      for (int m = 0; m < out.rows; ++m) {
        const int sm = m + km - 1;
        if (sm < 0 || sm >= out.rows) continue;
        const int h0 = std::max(0, 1 - kh);
        const int h1 = out.cols - 1 - std::max(0, kh - 1);
        if (h1 < h0) continue;
        const int n = h1 - h0 + 1;
        out.v.block(0, sm * out.cols + (h0 + kh - 1), C, n) +=
            col.block(k * C, m * out.cols + h0, C, n);
      }
    }
  }
}

/// Target pixel of the stride-2 transpose-conv scatter: input pixel (m,h),
/// kernel offset (km,kh) lands on output (2m+km-1, 2h+kh-1); -1 = clipped.
inline int tconv_target(int m, int h, int km, int kh, int out_rows, int out_cols) {
  const int r = 2 * m + km - 1;
  const int c = 2 * h + kh - 1;
  if (r < 0 || r >= out_rows || c < 0 || c >= out_cols) return -1;
  return r * out_cols + c;
}

}  // namespace conv_detail

/// y = W * im2col(x) + b. W is (out_c x 9*in_c), b is out_c.
template <class T>
Fmap<T> conv3x3_forward(const Mat<T>& w, const Vec<T>& b, const Fmap<T>& in) {
  Mat<T> col;
  conv_detail::im2col_3x3(in, col);
  Fmap<T> out{Mat<T>(), in.rows, in.cols};
  out.v.noalias() = w * col;
  out.v.colwise() += b;
  return out;
}

/// Gradients of conv3x3_forward. d_in may be skipped for the first layer.
template <class T>
void conv3x3_backward(const Mat<T>& w, const Fmap<T>& in, const Mat<T>& d_out, Mat<T>& d_w,
                      Vec<T>& d_b, Fmap<T>* d_in) {
  Mat<T> col;
  conv_detail::im2col_3x3(in, col);
  d_w.noalias() = d_out * col.transpose();
  d_b = d_out.rowwise().sum();
  if (d_in != nullptr) {
    Mat<T> d_col;
    d_col.noalias() = w.transpose() * d_out;
    d_in->rows = in.rows;
    d_in->cols = in.cols;
    conv_detail::col2im_3x3(d_col, *d_in);
  }
}

template <class T>
Fmap<T> conv1x1_forward(const Mat<T>& w, const Vec<T>& b, const Fmap<T>& in) {
  Fmap<T> out{Mat<T>(), in.rows, in.cols};
  out.v.noalias() = w * in.v;
  out.v.colwise() += b;
  return out;
}

template <class T>
void conv1x1_backward(const Mat<T>& w, const Fmap<T>& in, const Mat<T>& d_out, Mat<T>& d_w,
                      Vec<T>& d_b, Fmap<T>* d_in) {
  d_w.noalias() = d_out * in.v.transpose();
  d_b = d_out.rowwise().sum();
  if (d_in != nullptr) {
    d_in->rows = in.rows;
    d_in->cols = in.cols;
    d_in->v.noalias() = w.transpose() * d_out;
  }
}

using ArgmaxGrid = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// 2x2 max-pool with stride 2; requires even dimensions. Ties resolve to the
/// first window element in scan order, recorded in arg for the backward pass.
template <class T>
Fmap<T> maxpool2_forward(const Fmap<T>& in, ArgmaxGrid& arg) {
  if (in.rows % 2 != 0 || in.cols % 2 != 0) {
    throw std::invalid_argument("maxpool2: dimensions must be even");
  }
  const int C = in.channels();
  Fmap<T> out{Mat<T>(C, in.pixels() / 4), in.rows / 2, in.cols / 2};
  arg.resize(C, out.pixels());
  for (int mo = 0; mo < out.rows; ++mo) {
    for (int ho = 0; ho < out.cols; ++ho) {
      const int po = mo * out.cols + ho;
      const int base = 2 * mo * in.cols + 2 * ho;
      const int px[4] = {base, base + 1, base + in.cols, base + in.cols + 1};
      for (int c = 0; c < C; ++c) {
        T best = in.v(c, px[0]);
        int best_k = 0;
        for (int k = 1; k < 4; ++k) {
          if (in.v(c, px[k]) > best) {
            best = in.v(c, px[k]);
            best_k = k;
          }
        }
        out.v(c, po) = best;
        arg(c, po) = static_cast<std::uint8_t>(best_k);
      }
    }
  }
  return out;
}

template <class T>
void maxpool2_backward(const Mat<T>& d_out, const ArgmaxGrid& arg, Fmap<T>& d_in) {
  const int C = static_cast<int>(d_out.rows());
  const int out_rows = d_in.rows / 2;
  const int out_cols = d_in.cols / 2;
  d_in.v.setZero(C, d_in.rows * d_in.cols);
  for (int mo = 0; mo < out_rows; ++mo) {
    for (int ho = 0; ho < out_cols; ++ho) {
      const int po = mo * out_cols + ho;
      const int base = 2 * mo * d_in.cols + 2 * ho;
      const int px[4] = {base, base + 1, base + d_in.cols, base + d_in.cols + 1};
      for (int c = 0; c < C; ++c) {
        d_in.v(c, px[arg(c, po)]) += d_out(c, po);
      }
    }
  }
}

/// 3x3 transpose convolution, stride 2, padding 1, output padding 1: exactly
/// doubles the spatial size. W is stored (in_c x 9*out_c); kernel block k
/// occupies columns [k*out_c, (k+1)*out_c).
template <class T>
Fmap<T> tconv3x3s2_forward(const Mat<T>& w, const Vec<T>& b, const Fmap<T>& in) {
  const int out_c = static_cast<int>(w.cols()) / 9;
  Fmap<T> out{Mat<T>(out_c, in.pixels() * 4), in.rows * 2, in.cols * 2};
  out.v.colwise() = b;

  Mat<T> g;
  g.noalias() = w.transpose() * in.v;  // (9*out_c) x P_in
  for (int km = 0; km < 3; ++km) {
    for (int kh = 0; kh < 3; ++kh) {
      const int k = km * 3 + kh;
      for (int m = 0; m < in.rows; ++m) {
        for (int h = 0; h < in.cols; ++h) {
          const int q = conv_detail::tconv_target(m, h, km, kh, out.rows, out.cols);
          if (q >= 0) out.v.col(q) += g.block(k * out_c, m * in.cols + h, out_c, 1);
        }
      }
    }
  }
  return out;
}

template <class T>
void tconv3x3s2_backward(const Mat<T>& w, const Fmap<T>& in, const Fmap<T>& d_out, Mat<T>& d_w,
                         Vec<T>& d_b, Fmap<T>* d_in) {
  const int out_c = d_out.channels();
  Mat<T> g(9 * out_c, in.pixels());  // gather of d_out along the scatter map
  g.setZero();
  for (int km = 0; km < 3; ++km) {
    for (int kh = 0; kh < 3; ++kh) {
      const int k = km * 3 + kh;
      for (int m = 0; m < in.rows; ++m) {
        for (int h = 0; h < in.cols; ++h) {
          const int q = conv_detail::tconv_target(m, h, km, kh, d_out.rows, d_out.cols);
          if (q >= 0) g.block(k * out_c, m * in.cols + h, out_c, 1) = d_out.v.col(q);
        }
      }
    }
  }
  d_w.noalias() = in.v * g.transpose();
  d_b = d_out.v.rowwise().sum();
  if (d_in != nullptr) {
    d_in->rows = in.rows;
    d_in->cols = in.cols;
    d_in->v.noalias() = w * g;
  }
}

template <class T>
void relu_inplace(Mat<T>& v) {
  v = v.cwiseMax(T(0));
}

/// dL/dx given the *post*-activation values (ReLU output) and dL/dy.
template <class T>
Mat<T> relu_backward(const Mat<T>& activated, const Mat<T>& d_out) {
  return (activated.array() > T(0)).template cast<T>() * d_out.array();
}

/// Per-pixel (per-column) softmax across channels.
template <class T>
void softmax_channels_inplace(Mat<T>& v) {
  for (Eigen::Index p = 0; p < v.cols(); ++p) {
    auto col = v.col(p).array();
    col -= col.maxCoeff();
    col = col.exp();
    col /= col.sum();
  }
}

template <class T>
void sigmoid_inplace(Mat<T>& v) {
  v = v.unaryExpr([](T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
  });
}

/// Jacobian-vector products through the head activations, from gradients with
/// respect to probabilities to gradients with respect to logits.
template <class T>
Mat<T> softmax_backward(const Mat<T>& probs, const Mat<T>& d_probs) {
  Mat<T> d_logits(probs.rows(), probs.cols());
  for (Eigen::Index p = 0; p < probs.cols(); ++p) {
    const T dot = probs.col(p).dot(d_probs.col(p));
    d_logits.col(p) = probs.col(p).array() * (d_probs.col(p).array() - dot);
  }
  return d_logits;
}

template <class T>
Mat<T> sigmoid_backward(const Mat<T>& probs, const Mat<T>& d_probs) {
  return probs.array() * (T(1) - probs.array()) * d_probs.array();
}

}  // namespace propseg
