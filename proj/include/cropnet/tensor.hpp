#pragma once

// Dense n-dimensional double tensors plus the handful of primitives the
// network needs, each with a hand-derived backward pass. Layout is flat
// row-major; rank-3 image tensors are [H x W x C], conv kernels are
// [Kh x Kw x Cin x Cout].

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cropnet/errors.hpp"
#include "cropnet/rng.hpp"

namespace cropnet {

inline std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)), values(count(shape), 0.0) {}

  Tensor(std::vector<std::size_t> s, std::vector<double> v)
      : shape(std::move(s)), values(std::move(v)) {
    if (count(shape) != values.size()) {
      throw DataError("tensor shape " + shape_to_string(shape) + " does not match " +
                      std::to_string(values.size()) + " values");
    }
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<std::size_t> s, double v) {
    Tensor t(std::move(s));
    std::fill(t.values.begin(), t.values.end(), v);
    return t;
  }

  static Tensor vec(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({n}, std::move(v));
  }

  std::size_t numel() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  double& operator()(std::size_t i) { return values[i]; }
  double operator()(std::size_t i) const { return values[i]; }

  double& operator()(std::size_t i, std::size_t j) {
    return values[i * shape[1] + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return values[i * shape[1] + j];
  }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return values[(i * shape[1] + j) * shape[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return values[(i * shape[1] + j) * shape[2] + k];
  }

  double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return values[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return values[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void require_rank(const Tensor& t, std::size_t r, const char* what) {
  if (t.rank() != r) {
    throw DataError(std::string(what) + ": expected rank " + std::to_string(r) +
                    ", got shape " + shape_to_string(t.shape));
  }
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  if (a.shape[1] != b.shape[0]) {
    throw DataError("matmul shape mismatch: " + shape_to_string(a.shape) + " x " +
                    shape_to_string(b.shape));
  }
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[0] ? b.shape[1] : 0;
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.values.data() + i * k;
    double* orow = out.values.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.values.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

/// d(loss)/d(a), d(loss)/d(b) given upstream gradient on the product.
inline std::pair<Tensor, Tensor> matmul_backward(const Tensor& a, const Tensor& b,
                                                 const Tensor& grad_out) {
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor ga({m, k}), gb({k, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = grad_out.values.data() + i * n;
    double* garow = ga.values.data() + i * k;
    const double* arow = a.values.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b.values.data() + p * n;
      double acc = 0.0;
      double* gbrow = gb.values.data() + p * n;
      const double av = arow[p];
      for (std::size_t j = 0; j < n; ++j) {
        acc += grow[j] * brow[j];
        gbrow[j] += av * grow[j];
      }
      garow[p] = acc;
    }
  }
  return {std::move(ga), std::move(gb)};
}

// ---------------------------------------------------------------------------
// conv2d (cross-correlation, bias per output channel)
// ---------------------------------------------------------------------------

enum class Padding { Same, Valid };

inline void check_conv_args(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                            Padding padding) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  require_rank(bias, 1, "conv2d bias");
  const std::size_t kh = kernels.shape[0], kw = kernels.shape[1];
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw DataError("conv2d kernel dims must be odd, got " + shape_to_string(kernels.shape));
  }
  if (kernels.shape[2] != input.shape[2]) {
    throw DataError("conv2d channel mismatch: input " + shape_to_string(input.shape) +
                    " vs kernels " + shape_to_string(kernels.shape));
  }
  if (bias.shape[0] != kernels.shape[3]) {
    throw DataError("conv2d bias size " + shape_to_string(bias.shape) +
                    " does not match output channels of " + shape_to_string(kernels.shape));
  }
  if (padding == Padding::Valid && (kh > input.shape[0] || kw > input.shape[1])) {
    throw DataError("conv2d kernel " + shape_to_string(kernels.shape) +
                    " larger than input " + shape_to_string(input.shape) + " in valid mode");
  }
}

inline Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                     Padding padding) {
  check_conv_args(input, kernels, bias, padding);
  const std::size_t h = input.shape[0], w = input.shape[1], cin = input.shape[2];
  const std::size_t kh = kernels.shape[0], kw = kernels.shape[1], cout = kernels.shape[3];
  const std::size_t ph = padding == Padding::Same ? kh / 2 : 0;
  const std::size_t pw = padding == Padding::Same ? kw / 2 : 0;
  const std::size_t oh = padding == Padding::Same ? h : h - kh + 1;
  const std::size_t ow = padding == Padding::Same ? w : w - kw + 1;

  Tensor out({oh, ow, cout});
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double* orow = out.values.data() + (y * ow + x) * cout;
      for (std::size_t c = 0; c < cout; ++c) orow[c] = bias.values[c];
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(ph);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(pw);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const double* irow = input.values.data() + (iy * w + ix) * cin;
          const double* krow = kernels.values.data() + (ky * kw + kx) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double iv = irow[ci];
            const double* kc = krow + ci * cout;
            for (std::size_t c = 0; c < cout; ++c) orow[c] += iv * kc[c];
          }
        }
      }
    }
  }
  return out;
}

/// Gradients w.r.t. input, kernels, and bias.
inline std::tuple<Tensor, Tensor, Tensor> conv2d_backward(const Tensor& input,
                                                          const Tensor& kernels,
                                                          const Tensor& grad_out,
                                                          Padding padding) {
  const std::size_t h = input.shape[0], w = input.shape[1], cin = input.shape[2];
  const std::size_t kh = kernels.shape[0], kw = kernels.shape[1], cout = kernels.shape[3];
  const std::size_t ph = padding == Padding::Same ? kh / 2 : 0;
  const std::size_t pw = padding == Padding::Same ? kw / 2 : 0;
  const std::size_t oh = grad_out.shape[0], ow = grad_out.shape[1];

  Tensor gin({h, w, cin});
  Tensor gk({kh, kw, cin, cout});
  Tensor gb({cout});
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      const double* grow = grad_out.values.data() + (y * ow + x) * cout;
      for (std::size_t c = 0; c < cout; ++c) gb.values[c] += grow[c];
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(ph);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(pw);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const double* irow = input.values.data() + (iy * w + ix) * cin;
          double* girow = gin.values.data() + (iy * w + ix) * cin;
          const double* krow = kernels.values.data() + (ky * kw + kx) * cin * cout;
          double* gkrow = gk.values.data() + (ky * kw + kx) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double iv = irow[ci];
            const double* kc = krow + ci * cout;
            double* gkc = gkrow + ci * cout;
            double acc = 0.0;
            for (std::size_t c = 0; c < cout; ++c) {
              acc += grow[c] * kc[c];
              gkc[c] += iv * grow[c];
            }
            girow[ci] += acc;
          }
        }
      }
    }
  }
  return {std::move(gin), std::move(gk), std::move(gb)};
}

// ---------------------------------------------------------------------------
// maxpool 2x2 (ceil mode: odd trailing row/column pooled over the partial window)
// ---------------------------------------------------------------------------

inline Tensor maxpool2x2_with_argmax(const Tensor& input, std::vector<std::size_t>& argmax) {
  require_rank(input, 3, "maxpool2x2 input");
  const std::size_t h = input.shape[0], w = input.shape[1], c = input.shape[2];
  if (h == 0 || w == 0 || c == 0) throw DataError("maxpool2x2 on empty tensor");
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  Tensor out({oh, ow, c});
  argmax.assign(out.numel(), 0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          const std::size_t iy = 2 * y + dy;
          if (iy >= h) continue;
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t ix = 2 * x + dx;
            if (ix >= w) continue;
            const std::size_t idx = (iy * w + ix) * c + ch;
            if (input.values[idx] > best) {
              best = input.values[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t oidx = (y * ow + x) * c + ch;
        out.values[oidx] = best;
        argmax[oidx] = best_idx;
      }
    }
  }
  return out;
}

inline Tensor maxpool2x2(const Tensor& input) {
  std::vector<std::size_t> argmax;
  return maxpool2x2_with_argmax(input, argmax);
}

inline Tensor maxpool2x2_backward(const std::vector<std::size_t>& input_shape,
                                  const std::vector<std::size_t>& argmax,
                                  const Tensor& grad_out) {
  Tensor gin(input_shape);
  for (std::size_t i = 0; i < grad_out.numel(); ++i) {
    gin.values[argmax[i]] += grad_out.values[i];
  }
  return gin;
}

// ---------------------------------------------------------------------------
// global average pool
// ---------------------------------------------------------------------------

inline Tensor global_avg_pool(const Tensor& input) {
  require_rank(input, 3, "global_avg_pool input");
  const std::size_t h = input.shape[0], w = input.shape[1], c = input.shape[2];
  if (h == 0 || w == 0 || c == 0) throw DataError("global_avg_pool on empty tensor");
  Tensor out({c});
  for (std::size_t i = 0; i < h * w; ++i) {
    const double* row = input.values.data() + i * c;
    for (std::size_t ch = 0; ch < c; ++ch) out.values[ch] += row[ch];
  }
  const double inv = 1.0 / static_cast<double>(h * w);
  for (double& v : out.values) v *= inv;
  return out;
}

inline Tensor global_avg_pool_backward(const std::vector<std::size_t>& input_shape,
                                       const Tensor& grad_out) {
  const std::size_t h = input_shape[0], w = input_shape[1], c = input_shape[2];
  const double inv = 1.0 / static_cast<double>(h * w);
  Tensor gin(input_shape);
  for (std::size_t i = 0; i < h * w; ++i) {
    double* row = gin.values.data() + i * c;
    for (std::size_t ch = 0; ch < c; ++ch) row[ch] = grad_out.values[ch] * inv;
  }
  return gin;
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

enum class Act { Relu, Tanh };

inline Tensor activation(const Tensor& x, Act kind) {
  Tensor out = x;
  if (kind == Act::Relu) {
    for (double& v : out.values) v = v > 0.0 ? v : 0.0;
  } else {
    for (double& v : out.values) v = std::tanh(v);
  }
  return out;
}

/// kind == Relu uses the forward input; kind == Tanh uses the forward output.
inline Tensor activation_backward(const Tensor& input, const Tensor& output, Act kind,
                                  const Tensor& grad_out) {
  Tensor gin = grad_out;
  if (kind == Act::Relu) {
    for (std::size_t i = 0; i < gin.numel(); ++i) {
      if (input.values[i] <= 0.0) gin.values[i] = 0.0;
    }
  } else {
    for (std::size_t i = 0; i < gin.numel(); ++i) {
      const double y = output.values[i];
      gin.values[i] *= (1.0 - y * y);
    }
  }
  return gin;
}

// ---------------------------------------------------------------------------
// softmax over a rank-1 score vector (max-subtracted for stability)
// ---------------------------------------------------------------------------

inline Tensor softmax(const Tensor& scores) {
  require_rank(scores, 1, "softmax input");
  if (scores.numel() == 0) throw DataError("softmax on empty vector");
  const double mx = *std::max_element(scores.values.begin(), scores.values.end());
  Tensor out = scores;
  double sum = 0.0;
  for (double& v : out.values) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : out.values) v /= sum;
  return out;
}

inline Tensor softmax_backward(const Tensor& alpha, const Tensor& grad_alpha) {
  double dot = 0.0;
  for (std::size_t i = 0; i < alpha.numel(); ++i) dot += alpha.values[i] * grad_alpha.values[i];
  Tensor gs = alpha;
  for (std::size_t i = 0; i < gs.numel(); ++i) {
    gs.values[i] = alpha.values[i] * (grad_alpha.values[i] - dot);
  }
  return gs;
}

// ---------------------------------------------------------------------------
// concatenation of rank-1 vectors
// ---------------------------------------------------------------------------

inline Tensor concat(const Tensor& a, const Tensor& b) {
  require_rank(a, 1, "concat lhs");
  require_rank(b, 1, "concat rhs");
  Tensor out({a.numel() + b.numel()});
  std::copy(a.values.begin(), a.values.end(), out.values.begin());
  std::copy(b.values.begin(), b.values.end(), out.values.begin() + a.numel());
  return out;
}

inline std::pair<Tensor, Tensor> concat_backward(std::size_t len_a, std::size_t len_b,
                                                 const Tensor& grad_out) {
  Tensor ga({len_a}), gb({len_b});
  std::copy(grad_out.values.begin(), grad_out.values.begin() + len_a, ga.values.begin());
  std::copy(grad_out.values.begin() + len_a, grad_out.values.end(), gb.values.begin());
  return {std::move(ga), std::move(gb)};
}

// ---------------------------------------------------------------------------
// inverted dropout mask
// ---------------------------------------------------------------------------

inline Tensor dropout_mask(const std::vector<std::size_t>& shape, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw DataError("dropout rate must be in [0,1), got " + std::to_string(rate));
  }
  Tensor mask(shape);
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  for (double& v : mask.values) v = rng.uniform() < keep ? scale : 0.0;
  return mask;
}

}  // namespace cropnet
