// Command-line front end: clean / search / baseline / describe / report.
// Exit codes: 0 ok, 2 I/O error, 3 config or schema error, 4 all experiments
// failed.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "benchnet/arch.hpp"
#include "benchnet/baselines.hpp"
#include "benchnet/harness.hpp"
#include "benchnet/metrics.hpp"
#include "benchnet/pipeline.hpp"
#include "benchnet/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace benchnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 2;
constexpr int kExitConfig = 3;
constexpr int kExitAllFailed = 4;

struct OutputDir {
  fs::path dir;
  bool force = false;

  void prepare() const { fs::create_directories(dir); }

  std::ofstream open(const std::string& name) const {
    const fs::path p = dir / name;
    if (fs::exists(p) && !force)
      throw std::ios_base::failure("refusing to overwrite " + p.string() +
                                   " (pass --force)");
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot write " + p.string());
    return out;
  }
};

ArchSpec arch_from_json(const json& doc) {
  const std::string kind = doc.at("architecture").get<std::string>();
  if (kind == "tri_mlp" || kind == "rev_tri_mlp" || kind == "rect_mlp") {
    MlpSpec s;
    s.family = kind == "tri_mlp" ? MlpFamily::trapezium
               : kind == "rev_tri_mlp" ? MlpFamily::reverse_trapezium
                                       : MlpFamily::rectangular;
    s.n = doc.at("n").get<int>();
    s.m = doc.at("m").get<int>();
    s.activation = activation_from_string(doc.value("activation", "relu"));
    return s;
  }
  if (kind == "tri_cnn") {
    CnnSpec s;
    s.filter_exponents = doc.at("filter_exponents").get<std::vector<int>>();
    s.kernel_size = doc.at("kernel_size").get<int>();
    s.stride = doc.value("stride", 1);
    auto fc = doc.at("fc_exponents").get<std::vector<int>>();
    if (fc.size() != 2) throw ConfigError("fc_exponents must be [hi, lo]");
    s.fc_hi = fc[0];
    s.fc_lo = fc[1];
    s.activation = activation_from_string(doc.value("activation", "relu"));
    return s;
  }
  if (kind == "residual") {
    ResidualSpec s;
    for (const auto& st : doc.at("stages")) {
      ResidualStage stage;
      stage.identity_blocks = st.at("r").get<int>();
      stage.width_exponent = st.at("p").get<int>();
      stage.entry_stride = st.value("stride", 1);
      s.stages.push_back(stage);
    }
    return s;
  }
  throw ConfigError("unknown architecture '" + kind + "'");
}

json model_to_json(const LinearModel& m) {
  return {{"version", 1},
          {"model", "linear_regression"},
          {"coefficients", m.coefficients},
          {"intercept", m.intercept}};
}

json model_to_json(const SvrModel& m) {
  return {{"version", 1},       {"model", "svr"}, {"weights", m.weights},
          {"intercept", m.intercept}, {"epsilon", m.epsilon}, {"C", m.C}};
}

json model_to_json(const ForestModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes)
      nodes.push_back({{"f", n.feature},
                       {"t", n.threshold},
                       {"v", n.value},
                       {"l", n.left},
                       {"r", n.right}});
    trees.push_back(std::move(nodes));
  }
  return {{"version", 1},
          {"model", "random_forest"},
          {"max_depth", m.max_depth},
          {"min_leaf", m.min_leaf},
          {"seed", m.seed},
          {"trees", std::move(trees)}};
}

void write_vocab_sidecar(const CleanDataset& ds, std::ostream& out) {
  json cols = json::object();
  for (const auto& c : ds.columns) {
    if (!c.categorical) continue;
    cols[c.name] = c.vocabulary;
  }
  json doc = {{"version", 1}, {"columns", std::move(cols)}};
  out << doc.dump(2) << "\n";
}

std::vector<double> parse_seed_list(const std::string& cell) {
  std::vector<double> out;
  std::stringstream ss(cell);
  std::string item;
  while (std::getline(ss, item, ';'))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

std::vector<ResultRecord> read_results_csv(const std::string& path) {
  auto rows = csv::parse_file(path);
  if (rows.empty()) throw ConfigError("empty results CSV: " + path);
  std::vector<ResultRecord> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < 16) throw ConfigError("short results row in " + path);
    ResultRecord rec;
    rec.id.architecture = row[1];
    rec.id.loss = row[2];
    rec.id.kernel = row[3];
    rec.id.stride = row[4];
    rec.id.filter_exponents = row[5];
    rec.id.fc_exponents = row[6];
    rec.id.optimizer = row[7];
    rec.id.epochs = row[8].empty() ? 0 : std::stoi(row[8]);
    auto r2s = parse_seed_list(row[12]);
    auto maes = parse_seed_list(row[13]);
    auto mses = parse_seed_list(row[14]);
    for (std::size_t i = 0; i < r2s.size(); ++i) {
      MetricsTriple t;
      t.r2 = r2s[i];
      t.r2_defined = !std::isnan(r2s[i]);
      t.mae = i < maes.size() ? maes[i] : 0.0;
      t.mse = i < mses.size() ? mses[i] : 0.0;
      rec.per_seed.push_back(t);
    }
    rec.mean.mae = std::stod(row[10]);
    rec.mean.mse = std::stod(row[11]);
    if (row[9] != "nan") {
      rec.mean.r2 = std::stod(row[9]);
      rec.mean.r2_defined = true;
    }
    rec.seconds = std::stod(row[15]);
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------

int cmd_clean(const std::string& input, const OutputDir& out, bool standardize) {
  RawTable table = raw_table_from_csv(input);
  PipelineOptions opt;
  opt.standardize = standardize;
  PipelineResult res = run_pipeline(std::move(table), opt);
  out.prepare();
  {
    auto f = out.open("cleaned.csv");
    write_clean_csv(res.dataset, f);
  }
  {
    auto f = out.open("report.txt");
    write_report(res.report, f);
  }
  {
    auto f = out.open("vocab.json");
    write_vocab_sidecar(res.dataset, f);
  }
  std::cerr << "clean: " << res.report.input_rows << " rows in, "
            << res.report.output_rows << " rows / " << res.dataset.feature_count()
            << " feature columns out\n";
  return kExitOk;
}

int cmd_search(const std::string& input, const std::string& grid_path,
               const OutputDir& out, std::uint64_t seed, std::size_t workers,
               bool timing, bool emit_svg) {
  CleanDataset ds = read_clean_csv(input);
  std::ifstream gf(grid_path);
  if (!gf) throw std::ios_base::failure("cannot open grid document: " + grid_path);
  json grid_doc;
  try {
    gf >> grid_doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("grid document is not valid JSON: ") + e.what());
  }
  GridResult grid = enumerate_grid(grid_doc, ds.feature_count(), seed);
  for (const auto& ex : grid.exclusions) std::cerr << "excluded: " << ex << "\n";
  if (grid.configs.empty()) throw ConfigError("grid: no feasible configurations");

  out.prepare();
  auto results = run_grid(grid.configs, ds, workers,
                          [&](std::size_t i, const ResultRecord& r) {
                            std::cerr << "done [" << (i + 1) << "/" << grid.configs.size()
                                      << "] " << r.id.key() << " r2_mean="
                                      << (r.mean.r2_defined ? format_double(r.mean.r2) : "nan")
                                      << (r.partial ? " (partial)" : "") << "\n";
                          });
  std::size_t failed = 0;
  for (const auto& r : results)
    if (r.per_seed.empty()) ++failed;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto f = out.open("trace_" + std::to_string(i) + ".csv");
    export_epoch_trace(results[i].first_seed_trace, f);
    if (emit_svg) {
      std::vector<svg::Series> series(2);
      series[0].first = "train_mse";
      series[1].first = "val_mse";
      for (std::size_t e = 0; e < results[i].first_seed_trace.size(); ++e) {
        series[0].second.emplace_back(double(e + 1), results[i].first_seed_trace[e].train.mse);
        series[1].second.emplace_back(double(e + 1), results[i].first_seed_trace[e].validation.mse);
      }
      auto sf = out.open("trace_" + std::to_string(i) + ".svg");
      svg::write_chart(sf, series);
    }
  }
  RankedTables tables = rank_results(results);
  {
    auto f = out.open("results_by_r2.csv");
    write_results_csv(tables.by_r2, f, timing);
  }
  {
    auto f = out.open("results_by_mse.csv");
    write_results_csv(tables.by_mse, f, timing);
  }
  return failed == results.size() ? kExitAllFailed : kExitOk;
}

int cmd_baseline(const std::string& input, const OutputDir& out, std::uint64_t seed,
                 bool timing, bool emit_svg) {
  CleanDataset ds = read_clean_csv(input);
  out.prepare();
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 5; ++i) seeds.push_back(seed + i);

  struct Entry {
    std::string name;
    std::vector<MetricsTriple> per_seed;
    std::vector<double> residuals;  // from the last seed
  };
  std::vector<Entry> entries{{"lr", {}, {}}, {"rf", {}, {}}, {"svr", {}, {}}};

  for (std::uint64_t s : seeds) {
    SplitSpec spec;
    spec.seed = s;
    Splits splits = split_dataset(ds.row_count(), spec);
    DatasetView v = make_view(ds, splits);
    // validation rows fold into training for the baselines (no epochs to tune)
    Matrix x_fit = v.x_train;
    std::vector<double> y_fit = v.y_train;
    x_fit.insert(x_fit.end(), v.x_val.begin(), v.x_val.end());
    y_fit.insert(y_fit.end(), v.y_val.begin(), v.y_val.end());

    LinearModel lr = fit_linear_regression(x_fit, y_fit);
    ForestModel rf = fit_random_forest(x_fit, y_fit, 100, 16, 2, s);
    SvrModel svr = fit_svr(x_fit, y_fit, 0.1, 1.0, 50, s);
    if (s == seeds.back()) {
      auto f1 = out.open("lr_model.json");
      f1 << model_to_json(lr).dump(2) << "\n";
      auto f2 = out.open("rf_model.json");
      f2 << model_to_json(rf).dump(2) << "\n";
      auto f3 = out.open("svr_model.json");
      f3 << model_to_json(svr).dump(2) << "\n";
    }
    auto score = [&](Entry& e, const std::vector<double>& pred) {
      e.per_seed.push_back(compute_metrics(pred, v.y_test));
      e.residuals.clear();
      for (std::size_t i = 0; i < pred.size(); ++i)
        e.residuals.push_back(pred[i] - v.y_test[i]);
    };
    score(entries[0], predict_all(lr, v.x_test));
    score(entries[1], predict_all(rf, v.x_test));
    score(entries[2], predict_all(svr, v.x_test));
  }

  std::vector<ResultRecord> records;
  for (auto& e : entries) {
    ResultRecord r;
    r.id.architecture = e.name;
    r.per_seed = e.per_seed;
    r.mean = mean_metrics(e.per_seed);
    records.push_back(std::move(r));
    {
      auto f = out.open("qq_" + e.name + ".csv");
      export_qq(e.residuals, f);
    }
    {
      auto f = out.open("residuals_" + e.name + ".csv");
      export_abs_residuals(e.residuals, f);
    }
    if (emit_svg) {
      std::vector<double> sorted = e.residuals;
      std::sort(sorted.begin(), sorted.end());
      svg::Series s{e.name, {}};
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double p = (double(i) + 0.5) / double(sorted.size());
        s.second.emplace_back(inv_normal_cdf(p), sorted[i]);
      }
      auto f = out.open("qq_" + e.name + ".svg");
      svg::write_chart(f, {s}, /*scatter=*/true);
    }
  }
  RankedTables tables = rank_results(records);
  auto f = out.open("baselines.csv");
  write_results_csv(tables.by_r2, f, timing);
  return kExitOk;
}

int cmd_describe(const std::string& spec_path) {
  std::ifstream in(spec_path);
  if (!in) throw std::ios_base::failure("cannot open spec document: " + spec_path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("spec document is not valid JSON: ") + e.what());
  }
  ArchSpec arch = arch_from_json(doc);
  const std::size_t input_width = doc.value("input_width", 24);
  LayerStack stack = build_stack(arch, {1, input_width});
  auto shapes = enumerate_layer_shapes(stack, {1, input_width});
  std::cout << "layer  kind             output_shape\n";
  std::cout << "input  -                " << shape_str(shapes[0]) << "\n";
  for (std::size_t i = 0; i < stack.size(); ++i) {
    std::string kind;
    switch (stack[i].kind) {
      case LayerDesc::Kind::dense:
        kind = "dense(" + std::to_string(stack[i].units) + ")";
        break;
      case LayerDesc::Kind::conv1d:
        kind = "conv1d(" + std::to_string(stack[i].filters) + ",k=" +
               std::to_string(stack[i].kernel_size) + ",s=" +
               std::to_string(stack[i].stride) + ")";
        break;
      case LayerDesc::Kind::activation:
        kind = to_string(stack[i].activation);
        break;
      case LayerDesc::Kind::flatten:
        kind = "flatten";
        break;
      case LayerDesc::Kind::residual_block:
        kind = std::string(stack[i].identity_skip ? "identity_block" : "conv_block") +
               "(" + std::to_string(stack[i].width / 4) + "," +
               std::to_string(stack[i].width / 4) + "," + std::to_string(stack[i].width) + ")";
        break;
    }
    std::cout << i << "      " << kind;
    for (std::size_t pad = kind.size(); pad < 17; ++pad) std::cout << ' ';
    std::cout << shape_str(shapes[i + 1]) << "\n";
  }
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& inputs, const OutputDir& out, bool timing) {
  std::vector<ResultRecord> records;
  for (const auto& path : inputs) {
    auto part = read_results_csv(path);
    records.insert(records.end(), part.begin(), part.end());
  }
  if (records.empty()) throw ConfigError("report: no records found");
  RankedTables tables = rank_results(std::move(records));
  out.prepare();
  {
    auto f = out.open("report_by_r2.csv");
    write_results_csv(tables.by_r2, f, timing);
  }
  {
    auto f = out.open("report_by_mse.csv");
    write_results_csv(tables.by_mse, f, timing);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"benchmark score prediction toolkit"};
  app.require_subcommand(1);

  std::string input, grid, out_path = "out", spec_path;
  std::vector<std::string> report_inputs;
  std::uint64_t seed = 42;
  std::size_t workers = 1;
  bool force = false, standardize = false, timing = false, emit_svg = false;

  auto* clean = app.add_subcommand("clean", "run the data cleaning pipeline");
  clean->add_option("--input", input)->required();
  clean->add_option("--out", out_path);
  clean->add_flag("--force", force);
  clean->add_flag("--standardize", standardize);

  auto* search = app.add_subcommand("search", "run a hyperparameter grid search");
  search->add_option("--input", input)->required();
  search->add_option("--grid", grid)->required();
  search->add_option("--out", out_path);
  search->add_option("--seed", seed);
  search->add_option("--workers", workers);
  search->add_flag("--force", force);
  search->add_flag("--timing", timing,
                   "record wall-clock seconds (off by default so outputs are "
                   "byte-stable across runs)");
  search->add_flag("--svg", emit_svg);

  auto* baseline = app.add_subcommand("baseline", "fit and score the baseline models");
  baseline->add_option("--input", input)->required();
  baseline->add_option("--out", out_path);
  baseline->add_option("--seed", seed);
  baseline->add_flag("--force", force);
  baseline->add_flag("--timing", timing);
  baseline->add_flag("--svg", emit_svg);

  auto* describe = app.add_subcommand("describe", "print the layer shapes of a network spec");
  describe->add_option("--input", spec_path)->required();

  auto* report = app.add_subcommand("report", "re-rank existing results CSVs");
  report->add_option("--input", report_inputs)->required();
  report->add_option("--out", out_path);
  report->add_flag("--force", force);
  report->add_flag("--timing", timing);

  CLI11_PARSE(app, argc, argv);

  OutputDir out{fs::path(out_path), force};
  try {
    if (clean->parsed()) return cmd_clean(input, out, standardize);
    if (search->parsed()) return cmd_search(input, grid, out, seed, workers, timing, emit_svg);
    if (baseline->parsed()) return cmd_baseline(input, out, seed, timing, emit_svg);
    if (describe->parsed()) return cmd_describe(spec_path);
    if (report->parsed()) return cmd_report(report_inputs, out, timing);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
