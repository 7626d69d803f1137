#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "benchnet/tensor.hpp"

namespace benchnet {

enum class ActivationKind { sigmoid, tanh, relu, identity };
enum class LossKind { mse, mae };

inline std::string to_string(ActivationKind k) {
  switch (k) {
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::relu: return "relu";
    case ActivationKind::identity: return "identity";
  }
  return "?";
}

inline std::string to_string(LossKind k) {
  return k == LossKind::mse ? "mse" : "mae";
}

inline ActivationKind activation_from_string(const std::string& s) {
  if (s == "sigmoid") return ActivationKind::sigmoid;
  if (s == "tanh") return ActivationKind::tanh;
  if (s == "relu") return ActivationKind::relu;
  if (s == "identity") return ActivationKind::identity;
  throw ConfigError("unknown activation: " + s);
}

inline LossKind loss_from_string(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "mae") return LossKind::mae;
  throw ConfigError("unknown loss: " + s);
}

struct DenseParams {
  Tensor weights;  // (out_units, in_units)
  Tensor bias;     // (out_units)
};

struct Conv1dParams {
  Tensor kernels;  // (filters, in_channels, kernel_size)
  Tensor bias;     // (filters)
  std::size_t stride = 1;
  bool same_pad = false;  // zero same-padding; stride must be 1
};

using Rng = std::mt19937_64;

/// Glorot/Xavier uniform: entries in [-L, L], L = sqrt(6 / (fan_in + fan_out)).
inline double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline Tensor glorot_uniform_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = glorot_limit(fan_in, fan_out);
  Tensor t({fan_out, fan_in});
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.data) v = dist(rng);
  return t;
}

inline Tensor dense_forward(const Tensor& x, const DenseParams& p,
                            const std::string& layer_name = "dense") {
  const std::size_t out_units = p.weights.shape[0];
  const std::size_t in_units = p.weights.shape[1];
  if (x.size() != in_units)
    throw ShapeError(layer_name + ": input length " + std::to_string(x.size()) +
                     " != in_units " + std::to_string(in_units));
  Tensor y({out_units});
  for (std::size_t o = 0; o < out_units; ++o) {
    double acc = p.bias[o];
    const double* w = &p.weights.data[o * in_units];
    for (std::size_t i = 0; i < in_units; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
  return y;
}

struct DenseGrads {
  Tensor grad_x;
  Tensor grad_w;
  Tensor grad_b;
};

inline DenseGrads dense_backward(const Tensor& x, const DenseParams& p,
                                 const Tensor& grad_out,
                                 const std::string& layer_name = "dense") {
  const std::size_t out_units = p.weights.shape[0];
  const std::size_t in_units = p.weights.shape[1];
  if (x.size() != in_units || grad_out.size() != out_units)
    throw ShapeError(layer_name + ": backward shape mismatch");
  DenseGrads g{Tensor({in_units}), Tensor({out_units, in_units}), grad_out};
  for (std::size_t o = 0; o < out_units; ++o) {
    const double go = grad_out[o];
    const double* w = &p.weights.data[o * in_units];
    double* gw = &g.grad_w.data[o * in_units];
    for (std::size_t i = 0; i < in_units; ++i) {
      gw[i] = go * x[i];
      g.grad_x[i] += w[i] * go;
    }
  }
  return g;
}

inline std::size_t conv1d_out_length(std::size_t length, std::size_t kernel_size,
                                     std::size_t stride, bool same_pad) {
  if (same_pad) return length;
  if (length < kernel_size) throw ShapeError("conv1d: input length < kernel size");
  return (length - kernel_size) / stride + 1;
}

inline Tensor conv1d_forward(const Tensor& x, const Conv1dParams& p,
                             const std::string& layer_name = "conv1d") {
  const std::size_t filters = p.kernels.shape[0];
  const std::size_t in_ch = p.kernels.shape[1];
  const std::size_t k = p.kernels.shape[2];
  if (x.rank() != 2 || x.shape[0] != in_ch)
    throw ShapeError(layer_name + ": expected input (channels=" + std::to_string(in_ch) +
                     ", length), got " + shape_str(x.shape));
  const std::size_t length = x.shape[1];
  if (p.same_pad && p.stride != 1)
    throw ShapeError(layer_name + ": same padding requires stride 1");
  if (!p.same_pad && length < k)
    throw ShapeError(layer_name + ": input length " + std::to_string(length) +
                     " < kernel size " + std::to_string(k));
  const std::size_t out_len = conv1d_out_length(length, k, p.stride, p.same_pad);
  const std::ptrdiff_t pad_left = p.same_pad ? static_cast<std::ptrdiff_t>((k - 1) / 2) : 0;
  Tensor y({filters, out_len});
  for (std::size_t f = 0; f < filters; ++f) {
    for (std::size_t t = 0; t < out_len; ++t) {
      double acc = p.bias[f];
      for (std::size_t c = 0; c < in_ch; ++c) {
        const double* xr = &x.data[c * length];
        const double* kr = &p.kernels.data[(f * in_ch + c) * k];
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t idx =
              static_cast<std::ptrdiff_t>(t * p.stride + j) - pad_left;
          if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(length)) continue;
          acc += kr[j] * xr[idx];
        }
      }
      y.at(f, t) = acc;
    }
  }
  return y;
}

struct Conv1dGrads {
  Tensor grad_x;
  Tensor grad_kernels;
  Tensor grad_bias;
};

inline Conv1dGrads conv1d_backward(const Tensor& x, const Conv1dParams& p,
                                   const Tensor& grad_out,
                                   const std::string& layer_name = "conv1d") {
  const std::size_t filters = p.kernels.shape[0];
  const std::size_t in_ch = p.kernels.shape[1];
  const std::size_t k = p.kernels.shape[2];
  const std::size_t length = x.shape[1];
  const std::size_t out_len = conv1d_out_length(length, k, p.stride, p.same_pad);
  if (grad_out.rank() != 2 || grad_out.shape[0] != filters || grad_out.shape[1] != out_len)
    throw ShapeError(layer_name + ": grad_out shape " + shape_str(grad_out.shape) +
                     " != expected (" + std::to_string(filters) + ", " +
                     std::to_string(out_len) + ")");
  const std::ptrdiff_t pad_left = p.same_pad ? static_cast<std::ptrdiff_t>((k - 1) / 2) : 0;
  Conv1dGrads g{Tensor(x.shape), Tensor(p.kernels.shape), Tensor(p.bias.shape)};
  for (std::size_t f = 0; f < filters; ++f) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const double go = grad_out.at(f, t);
      if (go == 0.0) continue;
      g.grad_bias[f] += go;
      for (std::size_t c = 0; c < in_ch; ++c) {
        const double* xr = &x.data[c * length];
        double* gx = &g.grad_x.data[c * length];
        const double* kr = &p.kernels.data[(f * in_ch + c) * k];
        double* gk = &g.grad_kernels.data[(f * in_ch + c) * k];
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t idx =
              static_cast<std::ptrdiff_t>(t * p.stride + j) - pad_left;
          if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(length)) continue;
          gk[j] += go * xr[idx];
          gx[idx] += go * kr[j];
        }
      }
    }
  }
  return g;
}

inline double activation_scalar(ActivationKind kind, double v) {
  switch (kind) {
    case ActivationKind::sigmoid: return 1.0 / (1.0 + std::exp(-v));
    case ActivationKind::tanh: return std::tanh(v);
    case ActivationKind::relu: return v > 0.0 ? v : 0.0;
    case ActivationKind::identity: return v;
  }
  return v;
}

/// Derivative as a function of the pre-activation input. relu'(0) is 0.
inline double activation_deriv(ActivationKind kind, double v) {
  switch (kind) {
    case ActivationKind::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-v));
      return s * (1.0 - s);
    }
    case ActivationKind::tanh: {
      const double t = std::tanh(v);
      return 1.0 - t * t;
    }
    case ActivationKind::relu: return v > 0.0 ? 1.0 : 0.0;
    case ActivationKind::identity: return 1.0;
  }
  return 1.0;
}

inline Tensor activation_apply(ActivationKind kind, const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = activation_scalar(kind, v);
  return y;
}

inline Tensor activation_backward(ActivationKind kind, const Tensor& x,
                                  const Tensor& grad_out) {
  if (!x.same_shape(grad_out))
    throw ShapeError("activation: grad_out shape mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= activation_deriv(kind, x[i]);
  return g;
}

inline Tensor residual_add(const Tensor& main, const Tensor& bypass) {
  if (!main.same_shape(bypass))
    throw ShapeError("residual merge: branch shapes differ, main " +
                     shape_str(main.shape) + " vs bypass " + shape_str(bypass.shape));
  Tensor y = main;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bypass[i];
  return y;
}

inline Tensor flatten(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("flatten: expected rank-2 input");
  return Tensor({x.shape[0] * x.shape[1]}, x.data);
}

inline Tensor unflatten(const Tensor& flat, const std::vector<std::size_t>& shape) {
  return Tensor(shape, flat.data);
}

struct LossResult {
  double value = 0.0;
  Tensor grad_pred;
};

inline LossResult loss_value_and_grad(LossKind kind, const Tensor& pred,
                                      const Tensor& truth) {
  if (pred.size() != truth.size())
    throw ShapeError("loss: pred/truth length mismatch");
  const std::size_t n = pred.size();
  if (n == 0) throw ShapeError("loss: empty batch");
  LossResult r;
  r.grad_pred = Tensor(pred.shape);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred[i] - truth[i];
    if (kind == LossKind::mse) {
      r.value += d * d * inv_n;
      r.grad_pred[i] = 2.0 * d * inv_n;
    } else {
      r.value += std::abs(d) * inv_n;
      r.grad_pred[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n;
    }
  }
  return r;
}

}  // namespace benchnet
