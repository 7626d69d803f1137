#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "benchnet/arch.hpp"
#include "benchnet/baselines.hpp"
#include "benchnet/metrics.hpp"
#include "benchnet/network.hpp"
#include "benchnet/optim.hpp"
#include "benchnet/pipeline.hpp"

namespace benchnet {

struct ExperimentConfig {
  ArchSpec arch;
  OptimizerKind optimizer = OptimizerKind::adam;
  OptimizerHyper hyper;
  LossKind loss = LossKind::mae;
  int epochs = 100;
  std::size_t batch_size = 10;
  std::vector<std::uint64_t> seeds;
  bool reshuffle_split_per_seed = true;
  std::uint64_t base_split_seed = 0;  // used when reshuffle is off
};

class TrainAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochMetrics {
  MetricsTriple train;
  MetricsTriple validation;
};

struct TrainResult {
  Network net;
  std::vector<EpochMetrics> trace;
};

inline std::vector<double> predict_net(Network& net, const Matrix& x) {
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& row : x) {
    Tensor in({1, row.size()}, row);
    out.push_back(net.forward(in)[0]);
  }
  return out;
}

/// Mini-batch training at fixed epochs: seeded shuffle per epoch, batches of
/// `batch_size` (final partial batch included), optimizer step per batch.
/// The validation trace is diagnostic only and never influences training.
inline TrainResult train_model(const LayerStack& stack, std::size_t input_width,
                               const ExperimentConfig& config, std::uint64_t seed,
                               const Matrix& x_train, const std::vector<double>& y_train,
                               const Matrix& x_val, const std::vector<double>& y_val,
                               const std::string& config_id = "") {
  Rng rng(seed);
  TrainResult result{instantiate(stack, {1, input_width}, rng), {}};
  auto [params, grads] = result.net.parameters();
  std::vector<OptimizerState> states;
  states.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    states.emplace_back(config.optimizer, config.hyper);

  const std::size_t n = x_train.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const double batch_n = static_cast<double>(end - start);
      result.net.zero_grads();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& row = x_train[order[i]];
        Tensor in({1, row.size()}, row);
        const double pred = result.net.forward(in)[0];
        const double truth = y_train[order[i]];
        const double diff = pred - truth;
        double grad;
        if (config.loss == LossKind::mse) {
          batch_loss += diff * diff / batch_n;
          grad = 2.0 * diff / batch_n;
        } else {
          batch_loss += std::abs(diff) / batch_n;
          grad = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / batch_n;
        }
        result.net.backward(Tensor({1}, {grad}));
      }
      if (!std::isfinite(batch_loss))
        throw TrainAbort("non-finite loss (config " + config_id + ", epoch " +
                         std::to_string(epoch) + ", batch at row " +
                         std::to_string(start) + ")");
      for (std::size_t p = 0; p < params.size(); ++p)
        states[p].step(*params[p], *grads[p]);
    }
    EpochMetrics em;
    em.train = compute_metrics(predict_net(result.net, x_train), y_train);
    em.validation = compute_metrics(predict_net(result.net, x_val), y_val);
    result.trace.push_back(em);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Experiment records and identity

struct ConfigIdentity {
  std::string architecture;
  std::string loss;
  std::string kernel;            // empty for MLPs
  std::string stride;            // empty for MLPs
  std::string filter_exponents;  // residual: identity-block counts per stage
  std::string fc_exponents;      // residual: stage width exponents
  std::string optimizer;
  int epochs = 0;

  std::string key() const {
    return architecture + "|" + loss + "|" + kernel + "|" + stride + "|" +
           filter_exponents + "|" + fc_exponents + "|" + optimizer + "|" +
           std::to_string(epochs);
  }
};

namespace detail {

inline std::string join_ints(const std::vector<int>& v, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace detail

inline ConfigIdentity identify(const ExperimentConfig& c) {
  ConfigIdentity id;
  id.architecture = arch_name(c.arch);
  id.loss = to_string(c.loss);
  id.optimizer = to_string(c.optimizer);
  id.epochs = c.epochs;
  if (std::holds_alternative<MlpSpec>(c.arch)) {
    const auto& m = std::get<MlpSpec>(c.arch);
    id.fc_exponents = std::to_string(m.n) + ".." + std::to_string(m.n - m.m);
    if (m.family == MlpFamily::rectangular)
      id.fc_exponents = std::to_string(m.n) + "x" + std::to_string(m.m);
  } else if (std::holds_alternative<CnnSpec>(c.arch)) {
    const auto& s = std::get<CnnSpec>(c.arch);
    id.kernel = std::to_string(s.kernel_size);
    id.stride = std::to_string(s.stride);
    id.filter_exponents = detail::join_ints(s.filter_exponents);
    id.fc_exponents = std::to_string(s.fc_hi) + ".." + std::to_string(s.fc_lo);
  } else {
    const auto& r = std::get<ResidualSpec>(c.arch);
    std::vector<int> rs, ps;
    for (const auto& st : r.stages) {
      rs.push_back(st.identity_blocks);
      ps.push_back(st.width_exponent);
    }
    id.filter_exponents = detail::join_ints(rs);
    id.fc_exponents = detail::join_ints(ps);
  }
  return id;
}

struct ResultRecord {
  ConfigIdentity id;
  std::vector<MetricsTriple> per_seed;  // test-set metrics
  MetricsTriple mean;
  double seconds = 0.0;
  bool partial = false;
  std::vector<EpochMetrics> first_seed_trace;
  std::vector<double> last_seed_residuals;  // pred - truth on the test split
};

inline MetricsTriple mean_metrics(const std::vector<MetricsTriple>& v) {
  MetricsTriple m;
  if (v.empty()) return m;
  double r2 = 0.0, mae = 0.0, mse = 0.0;
  bool defined = true;
  for (const auto& t : v) {
    if (!t.r2_defined) defined = false;
    r2 += t.r2;
    mae += t.mae;
    mse += t.mse;
  }
  const double n = static_cast<double>(v.size());
  m.mae = mae / n;
  m.mse = mse / n;
  if (defined) {
    m.r2 = r2 / n;
    m.r2_defined = true;
  }
  return m;
}

struct DatasetView {
  Matrix x_train, x_val, x_test;
  std::vector<double> y_train, y_val, y_test;
};

inline DatasetView make_view(const CleanDataset& ds, const Splits& s) {
  DatasetView v;
  auto fill = [&](const std::vector<std::size_t>& idx, Matrix& x, std::vector<double>& y) {
    for (std::size_t i : idx) {
      x.push_back(ds.features[i]);
      y.push_back(ds.target[i]);
    }
  };
  fill(s.train, v.x_train, v.y_train);
  fill(s.validation, v.x_val, v.y_val);
  fill(s.test, v.x_test, v.y_test);
  return v;
}

/// One grid point: per seed a fresh split (the seed drives both the shuffle
/// and the weight init), train, evaluate on the held-out test split.
inline ResultRecord run_experiment(const ExperimentConfig& config,
                                   const CleanDataset& dataset) {
  ResultRecord rec;
  rec.id = identify(config);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t width = dataset.feature_count();
  LayerStack stack = build_stack(config.arch, {1, width});
  for (std::size_t si = 0; si < config.seeds.size(); ++si) {
    const std::uint64_t seed = config.seeds[si];
    SplitSpec split_spec;
    split_spec.seed = config.reshuffle_split_per_seed ? seed : config.base_split_seed;
    Splits splits = split_dataset(dataset.row_count(), split_spec);
    DatasetView view = make_view(dataset, splits);
    try {
      TrainResult tr = train_model(stack, width, config, seed, view.x_train,
                                   view.y_train, view.x_val, view.y_val, rec.id.key());
      std::vector<double> pred = predict_net(tr.net, view.x_test);
      rec.per_seed.push_back(compute_metrics(pred, view.y_test));
      if (si == 0) rec.first_seed_trace = std::move(tr.trace);
      rec.last_seed_residuals.clear();
      for (std::size_t i = 0; i < pred.size(); ++i)
        rec.last_seed_residuals.push_back(pred[i] - view.y_test[i]);
    } catch (const TrainAbort&) {
      rec.partial = true;
    }
  }
  rec.mean = mean_metrics(rec.per_seed);
  if (rec.per_seed.size() < config.seeds.size()) rec.partial = true;
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// ---------------------------------------------------------------------------
// Grid enumeration

struct GridResult {
  std::vector<ExperimentConfig> configs;
  std::vector<std::string> exclusions;  // infeasible grid points, with reason
};

namespace detail {

template <typename T>
inline std::vector<T> require_list(const nlohmann::json& doc, const std::string& key) {
  if (!doc.contains(key))
    throw ConfigError("grid: missing key '" + key + "'");
  const auto& j = doc.at(key);
  if (!j.is_array() || j.empty())
    throw ConfigError("grid: '" + key + "' must be a non-empty list");
  std::vector<T> out;
  for (const auto& e : j) out.push_back(e.get<T>());
  return out;
}

}  // namespace detail

/// Cartesian product over the dimensions relevant to each architecture
/// family, filtered by shape feasibility on the given input width.
inline GridResult enumerate_grid(const nlohmann::json& doc, std::size_t input_width,
                                 std::uint64_t master_seed) {
  GridResult out;
  auto arches = detail::require_list<std::string>(doc, "architectures");
  auto losses = detail::require_list<std::string>(doc, "loss");
  auto optimizers = detail::require_list<std::string>(doc, "optimizer");
  auto epochs_list = detail::require_list<int>(doc, "epochs");

  std::vector<std::uint64_t> seeds;
  if (doc.contains("seeds")) {
    seeds = detail::require_list<std::uint64_t>(doc, "seeds");
  } else {
    for (std::uint64_t i = 0; i < 5; ++i) seeds.push_back(master_seed + i);
  }
  OptimizerHyper hyper;
  if (doc.contains("learning_rate")) hyper.learning_rate = doc.at("learning_rate").get<double>();
  const bool reshuffle = doc.value("reshuffle_split_per_seed", true);

  auto push = [&](ArchSpec arch, LossKind loss, OptimizerKind opt, int ep) {
    ExperimentConfig c;
    c.arch = std::move(arch);
    c.loss = loss;
    c.optimizer = opt;
    c.hyper = hyper;
    c.epochs = ep;
    c.seeds = seeds;
    c.reshuffle_split_per_seed = reshuffle;
    c.base_split_seed = master_seed;
    try {
      LayerStack stack = build_stack(c.arch, {1, input_width});
      enumerate_layer_shapes(stack, {1, input_width});
      out.configs.push_back(std::move(c));
    } catch (const ConfigError& e) {
      out.exclusions.push_back(identify(c).key() + ": " + e.what());
    }
  };

  for (const auto& arch_name : arches) {
    std::vector<ArchSpec> variants;
    if (arch_name == "tri_mlp" || arch_name == "rev_tri_mlp" || arch_name == "rect_mlp") {
      auto ns = detail::require_list<int>(doc, "mlp_n");
      auto ms = detail::require_list<int>(doc, "mlp_m");
      auto acts = detail::require_list<std::string>(doc, "activation");
      MlpFamily family = arch_name == "tri_mlp" ? MlpFamily::trapezium
                         : arch_name == "rev_tri_mlp" ? MlpFamily::reverse_trapezium
                                                      : MlpFamily::rectangular;
      for (int n : ns)
        for (int m : ms)
          for (const auto& a : acts)
            variants.push_back(MlpSpec{family, n, m, activation_from_string(a)});
    } else if (arch_name == "tri_cnn") {
      auto kernels = detail::require_list<int>(doc, "kernel_size");
      auto strides = detail::require_list<int>(doc, "stride");
      auto filters = detail::require_list<std::vector<int>>(doc, "filter_exponents");
      auto fcs = detail::require_list<std::vector<int>>(doc, "fc_exponents");
      auto acts = detail::require_list<std::string>(doc, "activation");
      for (const auto& fe : filters)
        for (const auto& fc : fcs) {
          if (fc.size() != 2)
            throw ConfigError("grid: fc_exponents entries must be [hi, lo] pairs");
          for (int k : kernels)
            for (int s : strides)
              for (const auto& a : acts)
                variants.push_back(CnnSpec{fe, k, s, fc[0], fc[1],
                                           activation_from_string(a)});
        }
    } else if (arch_name == "residual") {
      auto stage_lists = detail::require_list<nlohmann::json>(doc, "residual_stages");
      for (const auto& sl : stage_lists) {
        ResidualSpec spec;
        for (const auto& st : sl) {
          ResidualStage stage;
          stage.identity_blocks = st.at("r").get<int>();
          stage.width_exponent = st.at("p").get<int>();
          stage.entry_stride = st.value("stride", 1);
          spec.stages.push_back(stage);
        }
        variants.push_back(std::move(spec));
      }
    } else {
      throw ConfigError("grid: unknown architecture '" + arch_name + "'");
    }
    for (const auto& v : variants)
      for (const auto& l : losses)
        for (const auto& o : optimizers)
          for (int ep : epochs_list)
            push(v, loss_from_string(l), optimizer_from_string(o), ep);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ranking and export

inline bool better_r2(const ResultRecord& a, const ResultRecord& b) {
  const double ar = a.mean.r2_defined ? a.mean.r2 : -1e300;
  const double br = b.mean.r2_defined ? b.mean.r2 : -1e300;
  if (ar != br) return ar > br;
  if (a.mean.mse != b.mean.mse) return a.mean.mse < b.mean.mse;
  return a.id.key() < b.id.key();
}

inline bool better_mse(const ResultRecord& a, const ResultRecord& b) {
  if (a.mean.mse != b.mean.mse) return a.mean.mse < b.mean.mse;
  const double ar = a.mean.r2_defined ? a.mean.r2 : -1e300;
  const double br = b.mean.r2_defined ? b.mean.r2 : -1e300;
  if (ar != br) return ar > br;
  return a.id.key() < b.id.key();
}

struct RankedTables {
  std::vector<ResultRecord> by_r2;   // descending mean R^2
  std::vector<ResultRecord> by_mse;  // ascending mean MSE
};

inline RankedTables rank_results(std::vector<ResultRecord> records) {
  if (records.empty()) throw ConfigError("rank_results: no records");
  RankedTables t;
  t.by_r2 = records;
  std::stable_sort(t.by_r2.begin(), t.by_r2.end(), better_r2);
  t.by_mse = std::move(records);
  std::stable_sort(t.by_mse.begin(), t.by_mse.end(), better_mse);
  return t;
}

inline const char* kResultsCsvHeader =
    "rank,architecture,loss,kernel,stride,filter_exponents,fc_exponents,"
    "optimizer,epochs,r2_mean,mae_mean,mse_mean,r2_per_seed,mae_per_seed,"
    "mse_per_seed,seconds";

inline void write_results_csv(const std::vector<ResultRecord>& ranked, std::ostream& out,
                              bool with_timing = false) {
  out << kResultsCsvHeader << "\n";
  auto join_metric = [](const std::vector<MetricsTriple>& v, auto getter) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ";";
      s += format_double(getter(v[i]));
    }
    return s;
  };
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const ResultRecord& r = ranked[i];
    std::vector<std::string> row{
        std::to_string(i + 1),
        r.id.architecture,
        r.id.loss,
        r.id.kernel,
        r.id.stride,
        r.id.filter_exponents,
        r.id.fc_exponents,
        r.id.optimizer,
        r.id.epochs > 0 ? std::to_string(r.id.epochs) : "",
        r.mean.r2_defined ? format_double(r.mean.r2) : "nan",
        format_double(r.mean.mae),
        format_double(r.mean.mse),
        join_metric(r.per_seed, [](const MetricsTriple& m) { return m.r2; }),
        join_metric(r.per_seed, [](const MetricsTriple& m) { return m.mae; }),
        join_metric(r.per_seed, [](const MetricsTriple& m) { return m.mse; }),
        with_timing ? format_double(r.seconds) : "0",
    };
    if (r.partial) row[1] += " (partial)";
    csv::write_row(out, row);
  }
}

/// Q-Q pairs for sorted residuals: theoretical normal quantile at
/// (i - 0.5) / N against the sample quantile.
inline void export_qq(std::vector<double> residuals, std::ostream& out) {
  std::sort(residuals.begin(), residuals.end());
  out << "theoretical,sample\n";
  const std::size_t n = residuals.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    out << format_double(inv_normal_cdf(p)) << "," << format_double(residuals[i]) << "\n";
  }
}

inline void export_abs_residuals(const std::vector<double>& residuals, std::ostream& out) {
  out << "abs_residual\n";
  for (double r : residuals) out << format_double(std::abs(r)) << "\n";
}

inline void export_epoch_trace(const std::vector<EpochMetrics>& trace, std::ostream& out) {
  out << "epoch,train_r2,train_mae,train_mse,val_r2,val_mae,val_mse\n";
  for (std::size_t e = 0; e < trace.size(); ++e) {
    const auto& t = trace[e];
    out << (e + 1) << "," << (t.train.r2_defined ? format_double(t.train.r2) : "nan")
        << "," << format_double(t.train.mae) << "," << format_double(t.train.mse) << ","
        << (t.validation.r2_defined ? format_double(t.validation.r2) : "nan") << ","
        << format_double(t.validation.mae) << "," << format_double(t.validation.mse)
        << "\n";
  }
}

// ---------------------------------------------------------------------------
// Worker pool: grid points run concurrently, results land in enumeration
// order regardless of completion order.

inline std::vector<ResultRecord> run_grid(
    const std::vector<ExperimentConfig>& configs, const CleanDataset& dataset,
    std::size_t workers,
    const std::function<void(std::size_t, const ResultRecord&)>& progress = {}) {
  std::vector<ResultRecord> results(configs.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      results[i] = run_experiment(configs[i], dataset);
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(i, results[i]);
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

}  // namespace benchnet
