#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "benchnet/nn.hpp"
#include "benchnet/tensor.hpp"

namespace benchnet {

/// Trainable layer: forward caches what backward needs, backward accumulates
/// parameter gradients and returns the input gradient.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect(std::vector<Tensor*>& params, std::vector<Tensor*>& grads) {}
  virtual void zero_grads() {}
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(DenseParams p) : params_(std::move(p)) {
    grad_w_ = Tensor(params_.weights.shape);
    grad_b_ = Tensor(params_.bias.shape);
  }

  Tensor forward(const Tensor& x) override {
    input_ = x;
    return dense_forward(x, params_);
  }

  Tensor backward(const Tensor& grad_out) override {
    DenseGrads g = dense_backward(input_, params_, grad_out);
    for (std::size_t i = 0; i < grad_w_.size(); ++i) grad_w_[i] += g.grad_w[i];
    for (std::size_t i = 0; i < grad_b_.size(); ++i) grad_b_[i] += g.grad_b[i];
    return std::move(g.grad_x);
  }

  void collect(std::vector<Tensor*>& params, std::vector<Tensor*>& grads) override {
    params.push_back(&params_.weights);
    params.push_back(&params_.bias);
    grads.push_back(&grad_w_);
    grads.push_back(&grad_b_);
  }

  void zero_grads() override {
    std::fill(grad_w_.data.begin(), grad_w_.data.end(), 0.0);
    std::fill(grad_b_.data.begin(), grad_b_.data.end(), 0.0);
  }

  const DenseParams& params() const { return params_; }

 private:
  DenseParams params_;
  Tensor grad_w_, grad_b_;
  Tensor input_;
};

class Conv1dLayer final : public Layer {
 public:
  Conv1dLayer(Conv1dParams p) : params_(std::move(p)) {
    grad_k_ = Tensor(params_.kernels.shape);
    grad_b_ = Tensor(params_.bias.shape);
  }

  Tensor forward(const Tensor& x) override {
    input_ = x;
    return conv1d_forward(x, params_);
  }

  Tensor backward(const Tensor& grad_out) override {
    Conv1dGrads g = conv1d_backward(input_, params_, grad_out);
    for (std::size_t i = 0; i < grad_k_.size(); ++i) grad_k_[i] += g.grad_kernels[i];
    for (std::size_t i = 0; i < grad_b_.size(); ++i) grad_b_[i] += g.grad_bias[i];
    return std::move(g.grad_x);
  }

  void collect(std::vector<Tensor*>& params, std::vector<Tensor*>& grads) override {
    params.push_back(&params_.kernels);
    params.push_back(&params_.bias);
    grads.push_back(&grad_k_);
    grads.push_back(&grad_b_);
  }

  void zero_grads() override {
    std::fill(grad_k_.data.begin(), grad_k_.data.end(), 0.0);
    std::fill(grad_b_.data.begin(), grad_b_.data.end(), 0.0);
  }

 private:
  Conv1dParams params_;
  Tensor grad_k_, grad_b_;
  Tensor input_;
};

class ActivationLayer final : public Layer {
 public:
  explicit ActivationLayer(ActivationKind kind) : kind_(kind) {}

  Tensor forward(const Tensor& x) override {
    input_ = x;
    return activation_apply(kind_, x);
  }

  Tensor backward(const Tensor& grad_out) override {
    return activation_backward(kind_, input_, grad_out);
  }

 private:
  ActivationKind kind_;
  Tensor input_;
};

class FlattenLayer final : public Layer {
 public:
  Tensor forward(const Tensor& x) override {
    input_shape_ = x.shape;
    return flatten(x);
  }

  Tensor backward(const Tensor& grad_out) override {
    return unflatten(grad_out, input_shape_);
  }

 private:
  std::vector<std::size_t> input_shape_;
};

/// Residual unit: main chain plus a bypass (empty bypass = identity skip),
/// merged by elementwise add, ReLU applied after the merge.
class ResidualBlockLayer final : public Layer {
 public:
  ResidualBlockLayer(std::vector<std::unique_ptr<Layer>> main,
                     std::vector<std::unique_ptr<Layer>> bypass)
      : main_(std::move(main)), bypass_(std::move(bypass)) {}

  Tensor forward(const Tensor& x) override {
    Tensor m = x;
    for (auto& l : main_) m = l->forward(m);
    Tensor b = x;
    for (auto& l : bypass_) b = l->forward(b);
    merged_ = residual_add(m, b);
    return activation_apply(ActivationKind::relu, merged_);
  }

  Tensor backward(const Tensor& grad_out) override {
    Tensor g = activation_backward(ActivationKind::relu, merged_, grad_out);
    Tensor gm = g;
    for (auto it = main_.rbegin(); it != main_.rend(); ++it) gm = (*it)->backward(gm);
    Tensor gb = std::move(g);
    for (auto it = bypass_.rbegin(); it != bypass_.rend(); ++it) gb = (*it)->backward(gb);
    for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += gb[i];
    return gm;
  }

  void collect(std::vector<Tensor*>& params, std::vector<Tensor*>& grads) override {
    for (auto& l : main_) l->collect(params, grads);
    for (auto& l : bypass_) l->collect(params, grads);
  }

  void zero_grads() override {
    for (auto& l : main_) l->zero_grads();
    for (auto& l : bypass_) l->zero_grads();
  }

 private:
  std::vector<std::unique_ptr<Layer>> main_;
  std::vector<std::unique_ptr<Layer>> bypass_;
  Tensor merged_;
};

class Network {
 public:
  Network() = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Tensor forward(const Tensor& x) {
    Tensor y = x;
    for (auto& l : layers_) y = l->forward(y);
    return y;
  }

  Tensor backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  void zero_grads() {
    for (auto& l : layers_) l->zero_grads();
  }

  std::pair<std::vector<Tensor*>, std::vector<Tensor*>> parameters() {
    std::vector<Tensor*> params, grads;
    for (auto& l : layers_) l->collect(params, grads);
    return {std::move(params), std::move(grads)};
  }

  std::size_t layer_count() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace benchnet
