#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "benchnet/tensor.hpp"

namespace benchnet {

using Matrix = std::vector<std::vector<double>>;

struct LinearModel {
  std::vector<double> coefficients;
  double intercept = 0.0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;
  int left = -1;
  int right = -1;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const std::vector<double>& x) const {
    int i = 0;
    while (nodes[i].feature >= 0)
      i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].value;
  }
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  std::size_t max_depth = 16;
  std::size_t min_leaf = 2;
  std::uint64_t seed = 0;
};

struct SvrModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double epsilon = 0.1;
  double C = 1.0;
  std::vector<double> objective_trace;  // per epoch, non-increasing
};

namespace detail {

/// Gaussian elimination with partial pivoting; returns false on a pivot
/// too close to zero.
inline bool solve_linear_system(Matrix a, std::vector<double> b,
                                std::vector<double>& out) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-12) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  out.assign(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double acc = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) acc -= a[ri][c] * out[c];
    out[ri] = acc / a[ri][ri];
  }
  return true;
}

}  // namespace detail

/// Ordinary least squares via normal equations; singular systems fall back
/// to a small ridge (lambda = 1e-8).
inline LinearModel fit_linear_regression(const Matrix& x, const std::vector<double>& y) {
  if (x.empty()) throw ConfigError("linear regression: empty training set");
  const std::size_t n = x.size();
  const std::size_t f = x[0].size();
  const std::size_t d = f + 1;  // intercept last
  Matrix a(d, std::vector<double>(d, 0.0));
  std::vector<double> b(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = i < f ? x[r][i] : 1.0;
      b[i] += xi * y[r];
      for (std::size_t j = i; j < d; ++j) {
        const double xj = j < f ? x[r][j] : 1.0;
        a[i][j] += xi * xj;
      }
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) a[i][j] = a[j][i];
  std::vector<double> sol;
  if (!detail::solve_linear_system(a, b, sol)) {
    for (std::size_t i = 0; i < d; ++i) a[i][i] += 1e-8;
    if (!detail::solve_linear_system(a, b, sol))
      throw ConfigError("linear regression: normal equations unsolvable even with ridge");
  }
  LinearModel m;
  m.coefficients.assign(sol.begin(), sol.begin() + f);
  m.intercept = sol[f];
  return m;
}

inline double predict(const LinearModel& m, const std::vector<double>& x) {
  double acc = m.intercept;
  for (std::size_t i = 0; i < x.size(); ++i) acc += m.coefficients[i] * x[i];
  return acc;
}

namespace detail {

struct TreeBuilder {
  const Matrix& x;
  const std::vector<double>& y;
  std::size_t max_depth;
  std::size_t min_leaf;
  std::size_t features_per_split;
  std::mt19937_64& rng;
  RegressionTree tree;

  int build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
            std::size_t depth) {
    const std::size_t n = hi - lo;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      sum += y[idx[i]];
      sumsq += y[idx[i]] * y[idx[i]];
    }
    const double mean = sum / static_cast<double>(n);
    const double sse = sumsq - sum * mean;
    auto make_leaf = [&] {
      tree.nodes.push_back({-1, 0.0, mean, -1, -1});
      return static_cast<int>(tree.nodes.size() - 1);
    };
    if (depth >= max_depth || n < 2 * min_leaf || sse <= 1e-12) return make_leaf();

    const std::size_t f_count = x[0].size();
    std::vector<std::size_t> feats(f_count);
    std::iota(feats.begin(), feats.end(), 0);
    std::shuffle(feats.begin(), feats.end(), rng);
    feats.resize(std::min(features_per_split, f_count));

    int best_feat = -1;
    double best_thresh = 0.0, best_score = sse;
    for (std::size_t f : feats) {
      std::sort(idx.begin() + lo, idx.begin() + hi,
                [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
      double lsum = 0.0, lsq = 0.0;
      for (std::size_t i = lo; i + 1 < hi; ++i) {
        const double yv = y[idx[i]];
        lsum += yv;
        lsq += yv * yv;
        const std::size_t nl = i - lo + 1, nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        if (x[idx[i]][f] == x[idx[i + 1]][f]) continue;
        const double rsum = sum - lsum, rsq = sumsq - lsq;
        const double score = (lsq - lsum * lsum / static_cast<double>(nl)) +
                             (rsq - rsum * rsum / static_cast<double>(nr));
        if (score < best_score - 1e-12) {
          best_score = score;
          best_feat = static_cast<int>(f);
          best_thresh = 0.5 * (x[idx[i]][f] + x[idx[i + 1]][f]);
        }
      }
    }
    if (best_feat < 0) return make_leaf();

    auto mid_it = std::partition(idx.begin() + lo, idx.begin() + hi, [&](std::size_t a) {
      return x[a][static_cast<std::size_t>(best_feat)] <= best_thresh;
    });
    const std::size_t mid = static_cast<std::size_t>(mid_it - idx.begin());
    tree.nodes.push_back({best_feat, best_thresh, mean, -1, -1});
    const int node = static_cast<int>(tree.nodes.size() - 1);
    const int left = build(idx, lo, mid, depth + 1);
    const int right = build(idx, mid, hi, depth + 1);
    tree.nodes[node].left = left;
    tree.nodes[node].right = right;
    return node;
  }
};

}  // namespace detail

/// Bagged CART: bootstrap resample per tree, ceil(F/3) candidate features
/// per split, greedy variance-reduction splits.
inline ForestModel fit_random_forest(const Matrix& x, const std::vector<double>& y,
                                     std::size_t trees = 100, std::size_t max_depth = 16,
                                     std::size_t min_leaf = 2, std::uint64_t seed = 0) {
  if (x.size() < 2 * min_leaf)
    throw ConfigError("random forest: too few rows");
  ForestModel m;
  m.max_depth = max_depth;
  m.min_leaf = min_leaf;
  m.seed = seed;
  const std::size_t n = x.size();
  const std::size_t f_count = x[0].size();
  const std::size_t feats = (f_count + 2) / 3;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t t = 0; t < trees; ++t) {
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = pick(rng);
    detail::TreeBuilder builder{x, y, max_depth, min_leaf, feats, rng, {}};
    builder.build(sample, 0, sample.size(), 0);  // root lands at node index 0
    m.trees.push_back(std::move(builder.tree));
  }
  return m;
}

inline double predict(const ForestModel& m, const std::vector<double>& x) {
  double acc = 0.0;
  for (const auto& t : m.trees) acc += t.predict(x);
  return acc / static_cast<double>(m.trees.size());
}

/// Linear epsilon-insensitive SVR trained by guarded full-batch subgradient
/// descent on the primal objective; the step is halved and the update
/// reverted whenever it fails to improve the objective, so the recorded
/// trace is non-increasing.
inline SvrModel fit_svr(const Matrix& x, const std::vector<double>& y,
                        double epsilon = 0.1, double C = 1.0, std::size_t epochs = 50,
                        std::uint64_t seed = 0, double step0 = 0.1) {
  if (x.empty()) throw ConfigError("svr: empty training set");
  (void)seed;  // training is deterministic; kept for interface symmetry
  const std::size_t n = x.size();
  const std::size_t f = x[0].size();
  SvrModel m;
  m.epsilon = epsilon;
  m.C = C;
  m.weights.assign(f, 0.0);
  auto objective = [&](const std::vector<double>& w, double b) {
    double obj = 0.0;
    for (double wi : w) obj += 0.5 * wi * wi;
    double slack = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double p = b;
      for (std::size_t i = 0; i < f; ++i) p += w[i] * x[r][i];
      slack += std::max(0.0, std::abs(p - y[r]) - epsilon);
    }
    return obj + C * slack / static_cast<double>(n);
  };
  double step = step0;
  double cur = objective(m.weights, m.intercept);
  m.objective_trace.push_back(cur);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::vector<double> gw(f, 0.0);
    double gb = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double p = m.intercept;
      for (std::size_t i = 0; i < f; ++i) p += m.weights[i] * x[r][i];
      const double resid = p - y[r];
      if (std::abs(resid) <= epsilon) continue;
      const double s = resid > 0.0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < f; ++i) gw[i] += s * x[r][i];
      gb += s;
    }
    const double scale = C / static_cast<double>(n);
    for (std::size_t i = 0; i < f; ++i) gw[i] = m.weights[i] + scale * gw[i];
    gb *= scale;
    bool improved = false;
    for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
      std::vector<double> w2 = m.weights;
      for (std::size_t i = 0; i < f; ++i) w2[i] -= step * gw[i];
      const double b2 = m.intercept - step * gb;
      const double next = objective(w2, b2);
      if (next <= cur) {
        m.weights = std::move(w2);
        m.intercept = b2;
        cur = next;
        improved = true;
      } else {
        step *= 0.5;
      }
    }
    m.objective_trace.push_back(cur);
  }
  return m;
}

inline double predict(const SvrModel& m, const std::vector<double>& x) {
  double acc = m.intercept;
  for (std::size_t i = 0; i < x.size(); ++i) acc += m.weights[i] * x[i];
  return acc;
}

template <typename Model>
inline std::vector<double> predict_all(const Model& m, const Matrix& x,
                                       std::size_t expected_width) {
  if (!x.empty() && x[0].size() != expected_width)
    throw ShapeError("predict: feature width " + std::to_string(x[0].size()) +
                     " != training width " + std::to_string(expected_width));
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& row : x) out.push_back(predict(m, row));
  return out;
}

inline std::vector<double> predict_all(const LinearModel& m, const Matrix& x) {
  return predict_all(m, x, m.coefficients.size());
}
inline std::vector<double> predict_all(const SvrModel& m, const Matrix& x) {
  return predict_all(m, x, m.weights.size());
}
inline std::vector<double> predict_all(const ForestModel& m, const Matrix& x) {
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& row : x) out.push_back(predict(m, row));
  return out;
}

}  // namespace benchnet
