#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "benchnet/tensor.hpp"

namespace benchnet {

enum class OptimizerKind { sgd, rmsprop, adam };

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adam: return "adam";
  }
  return "?";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "rmsprop") return OptimizerKind::rmsprop;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer: " + s);
}

struct OptimizerHyper {
  double learning_rate = 0.001;
  double rho = 0.9;      // rmsprop decay
  double beta1 = 0.9;    // adam
  double beta2 = 0.999;  // adam
  double epsilon = 1e-8;
};

/// Per-parameter-tensor optimizer state. Accumulators are lazily sized on
/// the first step and zero-initialized.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::sgd;
  OptimizerHyper hyper;
  Tensor m;  // adam first moment
  Tensor v;  // adam/rmsprop second moment
  std::int64_t t = 0;

  explicit OptimizerState(OptimizerKind k = OptimizerKind::sgd,
                          OptimizerHyper h = {})
      : kind(k), hyper(h) {}

  void step(Tensor& param, const Tensor& grad) {
    if (!param.same_shape(grad))
      throw ShapeError("optimizer: param/grad shape mismatch");
    switch (kind) {
      case OptimizerKind::sgd: sgd_step(param, grad); break;
      case OptimizerKind::rmsprop: rmsprop_step(param, grad); break;
      case OptimizerKind::adam: adam_step(param, grad); break;
    }
  }

  void sgd_step(Tensor& param, const Tensor& grad) {
    const double lr = hyper.learning_rate;
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
  }

  void rmsprop_step(Tensor& param, const Tensor& grad) {
    ensure(v, param);
    const double lr = hyper.learning_rate;
    const double rho = hyper.rho;
    const double eps = hyper.epsilon;
    for (std::size_t i = 0; i < param.size(); ++i) {
      v[i] = rho * v[i] + (1.0 - rho) * grad[i] * grad[i];
      param[i] -= lr * grad[i] / (std::sqrt(v[i]) + eps);
    }
  }

  void adam_step(Tensor& param, const Tensor& grad) {
    ensure(m, param);
    ensure(v, param);
    ++t;
    const double lr = hyper.learning_rate;
    const double b1 = hyper.beta1;
    const double b2 = hyper.beta2;
    const double eps = hyper.epsilon;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }

 private:
  static void ensure(Tensor& acc, const Tensor& param) {
    if (acc.shape != param.shape) acc = Tensor(param.shape);
  }
};

}  // namespace benchnet
