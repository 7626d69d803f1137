#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "benchnet/network.hpp"
#include "benchnet/nn.hpp"
#include "benchnet/tensor.hpp"

namespace benchnet {

enum class MlpFamily { trapezium, reverse_trapezium, rectangular };

inline std::string to_string(MlpFamily f) {
  switch (f) {
    case MlpFamily::trapezium: return "trapezium";
    case MlpFamily::reverse_trapezium: return "reverse_trapezium";
    case MlpFamily::rectangular: return "rectangular";
  }
  return "?";
}

struct MlpSpec {
  MlpFamily family = MlpFamily::trapezium;
  int n = 4;  // width exponent, first (widest) layer has 2^n units
  int m = 1;  // depth control, narrowest hidden layer has 2^(n-m) units
  ActivationKind activation = ActivationKind::relu;
};

struct CnnSpec {
  // Two-element list (hi, lo) expands to the halving range hi..lo; longer
  // lists are explicit exponent sequences.
  std::vector<int> filter_exponents;
  int kernel_size = 3;
  int stride = 1;
  int fc_hi = 9;  // p
  int fc_lo = 5;  // p - q
  ActivationKind activation = ActivationKind::relu;
};

struct ResidualStage {
  int identity_blocks = 0;  // r
  int width_exponent = 6;   // p: stage output channels 2^p, narrow convs 2^(p-2)
  int entry_stride = 1;
};

struct ResidualSpec {
  std::vector<ResidualStage> stages;
};

using ArchSpec = std::variant<MlpSpec, CnnSpec, ResidualSpec>;

struct LayerDesc {
  enum class Kind { dense, conv1d, activation, flatten, residual_block };
  Kind kind;
  // dense
  std::size_t units = 0;
  // conv1d
  std::size_t filters = 0;
  std::size_t kernel_size = 0;
  std::size_t stride = 1;
  bool same_pad = false;
  // activation
  ActivationKind activation = ActivationKind::identity;
  // residual block
  bool identity_skip = false;
  std::size_t width = 0;  // output channels 2^p
  std::size_t entry_stride = 1;
};

using LayerStack = std::vector<LayerDesc>;

inline std::size_t pow2(int e) { return static_cast<std::size_t>(1) << e; }

inline void validate_mlp(const MlpSpec& s) {
  if (s.family == MlpFamily::rectangular) {
    if (s.n < 1 || s.n > 16) throw ConfigError("rectangular mlp: n out of range [1, 16]");
    if (s.m < 1) throw ConfigError("rectangular mlp: m must be >= 1");
    return;
  }
  if (s.n < 4 || s.n > 11) throw ConfigError("trapezium mlp: n must be in [4, 11]");
  if (s.m < 1 || s.m > 10) throw ConfigError("trapezium mlp: m must be in [1, 10]");
  if (s.n - s.m <= 1)
    throw ConfigError("trapezium mlp: requires n - m > 1, got n=" +
                      std::to_string(s.n) + " m=" + std::to_string(s.m));
}

inline std::vector<int> expand_filter_exponents(const std::vector<int>& exps) {
  if (exps.empty()) throw ConfigError("cnn: empty filter exponent list");
  std::vector<int> out;
  if (exps.size() == 2 && exps[0] > exps[1]) {
    for (int e = exps[0]; e >= exps[1]; --e) out.push_back(e);
  } else {
    out = exps;
  }
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i] >= out[i - 1])
      throw ConfigError("cnn: filter exponents must be strictly descending");
  for (int e : out)
    if (e < 1 || e > 16) throw ConfigError("cnn: filter exponent out of range");
  return out;
}

inline void validate_cnn(const CnnSpec& s) {
  expand_filter_exponents(s.filter_exponents);
  if (s.kernel_size < 2 || s.kernel_size > 5)
    throw ConfigError("cnn: kernel size must be in [2, 5]");
  if (s.stride < 1 || s.stride > 4)
    throw ConfigError("cnn: stride must be in [1, 4]");
  if (s.fc_hi < s.fc_lo) throw ConfigError("cnn: fc exponents must descend (hi >= lo)");
  if (s.fc_lo < 1) throw ConfigError("cnn: fc exponent range must end at >= 1");
  if (s.fc_hi > 16) throw ConfigError("cnn: fc exponent out of range");
}

inline void validate_residual(const ResidualSpec& s) {
  if (s.stages.empty()) throw ConfigError("residual: at least one stage required");
  for (std::size_t i = 0; i < s.stages.size(); ++i) {
    const auto& st = s.stages[i];
    if (st.width_exponent < 6 || st.width_exponent > 11)
      throw ConfigError("residual: stage width exponent p must be in [6, 11]");
    if (st.identity_blocks < 0) throw ConfigError("residual: negative identity block count");
    if (st.entry_stride < 1 || st.entry_stride > 4)
      throw ConfigError("residual: entry stride must be in [1, 4]");
    if (i > 0 && st.width_exponent != s.stages[i - 1].width_exponent + 1)
      throw ConfigError("residual: stage output width must double per stage, got exponents " +
                        std::to_string(s.stages[i - 1].width_exponent) + " then " +
                        std::to_string(st.width_exponent));
  }
}

inline std::vector<std::size_t> mlp_hidden_widths(const MlpSpec& s) {
  std::vector<std::size_t> widths;
  switch (s.family) {
    case MlpFamily::trapezium:
      for (int e = s.n; e >= s.n - s.m; --e) widths.push_back(pow2(e));
      break;
    case MlpFamily::reverse_trapezium:
      for (int e = s.n - s.m; e <= s.n; ++e) widths.push_back(pow2(e));
      break;
    case MlpFamily::rectangular:
      widths.assign(static_cast<std::size_t>(s.m), pow2(s.n));
      break;
  }
  return widths;
}

inline LayerStack build_mlp(const MlpSpec& spec, std::size_t input_width) {
  validate_mlp(spec);
  if (input_width < 1) throw ConfigError("mlp: input width must be >= 1");
  LayerStack stack;
  for (std::size_t w : mlp_hidden_widths(spec)) {
    stack.push_back({.kind = LayerDesc::Kind::dense, .units = w});
    stack.push_back({.kind = LayerDesc::Kind::activation, .activation = spec.activation});
  }
  stack.push_back({.kind = LayerDesc::Kind::dense, .units = 1});
  stack.push_back({.kind = LayerDesc::Kind::activation, .activation = ActivationKind::identity});
  return stack;
}

inline LayerStack build_tri_cnn(const CnnSpec& spec,
                                std::vector<std::size_t> input_shape = {1, 24}) {
  validate_cnn(spec);
  if (input_shape.size() != 2)
    throw ConfigError("cnn: expected rank-2 input shape (channels, length)");
  LayerStack stack;
  std::size_t length = input_shape[1];
  const auto exps = expand_filter_exponents(spec.filter_exponents);
  for (std::size_t i = 0; i < exps.size(); ++i) {
    const std::size_t k = static_cast<std::size_t>(spec.kernel_size);
    if (length < k)
      throw ConfigError("cnn: sequence length " + std::to_string(length) +
                        " exhausted before conv layer " + std::to_string(i + 1) +
                        " (kernel size " + std::to_string(k) + ")");
    stack.push_back({.kind = LayerDesc::Kind::conv1d,
                     .filters = pow2(exps[i]),
                     .kernel_size = k,
                     .stride = static_cast<std::size_t>(spec.stride)});
    stack.push_back({.kind = LayerDesc::Kind::activation, .activation = spec.activation});
    length = (length - k) / static_cast<std::size_t>(spec.stride) + 1;
  }
  stack.push_back({.kind = LayerDesc::Kind::flatten});
  for (int e = spec.fc_hi; e >= spec.fc_lo; --e) {
    stack.push_back({.kind = LayerDesc::Kind::dense, .units = pow2(e)});
    stack.push_back({.kind = LayerDesc::Kind::activation, .activation = spec.activation});
  }
  stack.push_back({.kind = LayerDesc::Kind::dense, .units = 1});
  stack.push_back({.kind = LayerDesc::Kind::activation, .activation = ActivationKind::identity});
  return stack;
}

inline LayerStack build_residual_net(const ResidualSpec& spec,
                                     std::vector<std::size_t> input_shape = {1, 24}) {
  validate_residual(spec);
  (void)input_shape;
  LayerStack stack;
  for (const auto& st : spec.stages) {
    stack.push_back({.kind = LayerDesc::Kind::residual_block,
                     .identity_skip = false,
                     .width = pow2(st.width_exponent),
                     .entry_stride = static_cast<std::size_t>(st.entry_stride)});
    for (int r = 0; r < st.identity_blocks; ++r)
      stack.push_back({.kind = LayerDesc::Kind::residual_block,
                       .identity_skip = true,
                       .width = pow2(st.width_exponent),
                       .entry_stride = 1});
  }
  stack.push_back({.kind = LayerDesc::Kind::flatten});
  stack.push_back({.kind = LayerDesc::Kind::dense, .units = 1});
  stack.push_back({.kind = LayerDesc::Kind::activation, .activation = ActivationKind::identity});
  return stack;
}

inline LayerStack build_stack(const ArchSpec& spec,
                              std::vector<std::size_t> input_shape) {
  if (std::holds_alternative<MlpSpec>(spec)) {
    std::size_t width = input_shape.size() == 2 ? input_shape[0] * input_shape[1]
                                                : input_shape.at(0);
    LayerStack stack;
    if (input_shape.size() == 2)
      stack.push_back({.kind = LayerDesc::Kind::flatten});
    for (auto& d : build_mlp(std::get<MlpSpec>(spec), width)) stack.push_back(d);
    return stack;
  }
  if (std::holds_alternative<CnnSpec>(spec))
    return build_tri_cnn(std::get<CnnSpec>(spec), input_shape);
  return build_residual_net(std::get<ResidualSpec>(spec), input_shape);
}

/// Shapes of the data flowing through the stack, input first.
inline std::vector<std::vector<std::size_t>> enumerate_layer_shapes(
    const LayerStack& stack, std::vector<std::size_t> input_shape) {
  std::vector<std::vector<std::size_t>> shapes;
  shapes.push_back(input_shape);
  std::vector<std::size_t> cur = std::move(input_shape);
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const LayerDesc& d = stack[i];
    switch (d.kind) {
      case LayerDesc::Kind::dense:
        if (cur.size() != 1)
          throw ConfigError("layer " + std::to_string(i) +
                            ": dense requires a flat input, got " + shape_str(cur));
        cur = {d.units};
        break;
      case LayerDesc::Kind::conv1d: {
        if (cur.size() != 2)
          throw ConfigError("layer " + std::to_string(i) + ": conv1d requires rank-2 input");
        if (!d.same_pad && cur[1] < d.kernel_size)
          throw ConfigError("layer " + std::to_string(i) + ": sequence length " +
                            std::to_string(cur[1]) + " < kernel size " +
                            std::to_string(d.kernel_size));
        cur = {d.filters, conv1d_out_length(cur[1], d.kernel_size, d.stride, d.same_pad)};
        break;
      }
      case LayerDesc::Kind::activation:
        break;
      case LayerDesc::Kind::flatten:
        if (cur.size() != 2)
          throw ConfigError("layer " + std::to_string(i) + ": flatten requires rank-2 input");
        cur = {cur[0] * cur[1]};
        break;
      case LayerDesc::Kind::residual_block: {
        if (cur.size() != 2)
          throw ConfigError("layer " + std::to_string(i) + ": residual block requires rank-2 input");
        if (d.identity_skip && cur[0] != d.width)
          throw ConfigError("layer " + std::to_string(i) + ": identity block input width " +
                            std::to_string(cur[0]) + " != block width " +
                            std::to_string(d.width) + " (must be the same)");
        std::size_t len = d.identity_skip
                              ? cur[1]
                              : (cur[1] - 1) / d.entry_stride + 1;
        cur = {d.width, len};
        break;
      }
    }
    shapes.push_back(cur);
  }
  return shapes;
}

namespace detail {

inline void glorot_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = glorot_limit(fan_in, fan_out);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.data) v = dist(rng);
}

inline std::unique_ptr<Conv1dLayer> make_conv(std::size_t in_ch, std::size_t filters,
                                              std::size_t k, std::size_t stride,
                                              bool same_pad, Rng& rng) {
  Conv1dParams p;
  p.kernels = Tensor({filters, in_ch, k});
  glorot_fill(p.kernels, in_ch * k, filters * k, rng);
  p.bias = Tensor({filters});
  p.stride = stride;
  p.same_pad = same_pad;
  return std::make_unique<Conv1dLayer>(std::move(p));
}

inline std::unique_ptr<DenseLayer> make_dense(std::size_t in, std::size_t out, Rng& rng) {
  DenseParams p;
  p.weights = glorot_uniform_init(in, out, rng);
  p.bias = Tensor({out});
  return std::make_unique<DenseLayer>(std::move(p));
}

}  // namespace detail

/// Materialize a descriptor stack into a trainable network with Glorot
/// weights and zero biases. Interior residual convs use kernel sizes
/// (1, 3, 1); the 3-wide conv is same-padded so the merge shape-checks.
inline Network instantiate(const LayerStack& stack,
                           std::vector<std::size_t> input_shape, Rng& rng) {
  Network net;
  std::vector<std::size_t> cur = std::move(input_shape);
  for (const LayerDesc& d : stack) {
    switch (d.kind) {
      case LayerDesc::Kind::dense:
        net.add(detail::make_dense(cur.at(0), d.units, rng));
        cur = {d.units};
        break;
      case LayerDesc::Kind::conv1d:
        net.add(detail::make_conv(cur.at(0), d.filters, d.kernel_size, d.stride,
                                  d.same_pad, rng));
        cur = {d.filters, conv1d_out_length(cur.at(1), d.kernel_size, d.stride, d.same_pad)};
        break;
      case LayerDesc::Kind::activation:
        net.add(std::make_unique<ActivationLayer>(d.activation));
        break;
      case LayerDesc::Kind::flatten:
        net.add(std::make_unique<FlattenLayer>());
        cur = {cur.at(0) * cur.at(1)};
        break;
      case LayerDesc::Kind::residual_block: {
        const std::size_t in_ch = cur.at(0);
        const std::size_t narrow = d.width / 4;
        std::vector<std::unique_ptr<Layer>> main;
        main.push_back(detail::make_conv(in_ch, narrow, 1, d.entry_stride, false, rng));
        main.push_back(std::make_unique<ActivationLayer>(ActivationKind::relu));
        main.push_back(detail::make_conv(narrow, narrow, 3, 1, true, rng));
        main.push_back(std::make_unique<ActivationLayer>(ActivationKind::relu));
        main.push_back(detail::make_conv(narrow, d.width, 1, 1, false, rng));
        std::vector<std::unique_ptr<Layer>> bypass;
        if (!d.identity_skip)
          bypass.push_back(detail::make_conv(in_ch, d.width, 1, d.entry_stride, false, rng));
        net.add(std::make_unique<ResidualBlockLayer>(std::move(main), std::move(bypass)));
        cur = {d.width, d.identity_skip ? cur.at(1) : (cur.at(1) - 1) / d.entry_stride + 1};
        break;
      }
    }
  }
  return net;
}

inline std::string arch_name(const ArchSpec& spec) {
  if (std::holds_alternative<MlpSpec>(spec)) {
    const auto& m = std::get<MlpSpec>(spec);
    switch (m.family) {
      case MlpFamily::trapezium: return "tri_mlp";
      case MlpFamily::reverse_trapezium: return "rev_tri_mlp";
      case MlpFamily::rectangular: return "rect_mlp";
    }
  }
  if (std::holds_alternative<CnnSpec>(spec)) return "tri_cnn";
  return "residual";
}

}  // namespace benchnet
