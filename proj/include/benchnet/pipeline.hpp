#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "benchnet/csv.hpp"
#include "benchnet/tensor.hpp"

namespace benchnet {

struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::string source;

  std::optional<std::size_t> column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    return std::nullopt;
  }
};

inline RawTable raw_table_from_csv(const std::string& path) {
  auto cells = csv::parse_file(path);
  if (cells.empty()) throw ConfigError("empty CSV: " + path);
  RawTable t;
  t.source = path;
  t.columns = cells[0];
  for (std::size_t r = 1; r < cells.size(); ++r) {
    if (cells[r].size() != t.columns.size())
      throw ConfigError("ragged CSV row " + std::to_string(r) + " in " + path);
    t.rows.push_back(std::move(cells[r]));
  }
  return t;
}

struct UnitColumnReport {
  std::string column;
  std::size_t converted = 0;
  std::size_t failed = 0;
};

struct DroppedColumn {
  std::string column;
  std::string partner;  // empty for constant columns
  double tau = 0.0;
};

struct CleaningReport {
  std::size_t input_rows = 0;
  std::size_t characters_stripped = 0;
  std::size_t zero_target_rows_removed = 0;
  std::size_t unparseable_target_rows_removed = 0;
  std::vector<UnitColumnReport> units;
  std::vector<std::pair<std::string, std::vector<std::string>>> vocabularies;
  std::vector<std::tuple<std::string, std::string, double>> tau_pairs;
  std::vector<DroppedColumn> dropped;
  std::vector<std::string> retained;
  std::size_t output_rows = 0;
  bool standardized = false;
};

// ---------------------------------------------------------------------------
// Step 1: alphanumeric cleaning

inline std::string clean_cell(const std::string& s, std::size_t& stripped) {
  std::string out;
  bool pending_space = false;
  bool started = false;
  for (unsigned char c : s) {
    if (c < 0x20 || c == 0x7f || c == ' ') {
      if (c != ' ') ++stripped;
      pending_space = true;
      continue;
    }
    if (pending_space && started) out += ' ';
    pending_space = false;
    started = true;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

inline std::string clean_column_name(const std::string& s, std::size_t& stripped) {
  std::string out;
  for (unsigned char c : s) {
    if (c < 0x20 || c == 0x7f) {
      ++stripped;
      continue;
    }
    if (c == ' ') continue;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

/// Tabs/escape characters removed (runs collapse to one space inside cells),
/// spaces removed from column names, everything lower-cased.
inline void clean_alphanumeric(RawTable& table, CleaningReport& report) {
  for (auto& name : table.columns) name = clean_column_name(name, report.characters_stripped);
  for (auto& row : table.rows)
    for (auto& cell : row) cell = clean_cell(cell, report.characters_stripped);
}

// ---------------------------------------------------------------------------
// Step 2: outlier removal (zero targets)

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

inline void drop_zero_targets(RawTable& table, const std::string& target_column,
                              CleaningReport& report) {
  auto idx = table.column_index(target_column);
  if (!idx)
    throw ConfigError("target column '" + target_column + "' not found in " + table.source);
  std::vector<std::vector<std::string>> kept;
  kept.reserve(table.rows.size());
  for (auto& row : table.rows) {
    auto v = parse_double(row[*idx]);
    if (!v) {
      ++report.unparseable_target_rows_removed;
    } else if (*v == 0.0) {
      ++report.zero_target_rows_removed;
    } else {
      kept.push_back(std::move(row));
    }
  }
  table.rows = std::move(kept);
}

// ---------------------------------------------------------------------------
// Step 3: unit normalization (everything to MB)

/// "1024 kb" -> 1, "64 gb (4 x 16 gb 2rx8)" -> 65536; bare numbers are taken
/// as MB already. Returns nullopt for cells with no leading quantity.
inline std::optional<double> to_megabytes(const std::string& cell) {
  const char* s = cell.c_str();
  char* end = nullptr;
  double qty = std::strtod(s, &end);
  if (end == s) return std::nullopt;
  std::string rest(end);
  std::size_t i = 0;
  while (i < rest.size() && rest[i] == ' ') ++i;
  std::string unit;
  while (i < rest.size() && std::isalpha(static_cast<unsigned char>(rest[i])))
    unit += rest[i++];
  if (unit.empty() || unit == "mb") return qty;
  if (unit == "kb") return qty / 1024.0;
  if (unit == "gb") return qty * 1024.0;
  if (unit == "tb") return qty * 1024.0 * 1024.0;
  return std::nullopt;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void normalize_units(RawTable& table, const std::vector<std::string>& unit_columns,
                            CleaningReport& report) {
  for (const auto& col : unit_columns) {
    auto idx = table.column_index(col);
    if (!idx) continue;
    UnitColumnReport ur;
    ur.column = col;
    for (auto& row : table.rows) {
      auto mb = to_megabytes(row[*idx]);
      if (mb) {
        row[*idx] = format_double(*mb);
        ++ur.converted;
      } else {
        row[*idx].clear();  // missing marker; handled categorically later
        ++ur.failed;
      }
    }
    report.units.push_back(std::move(ur));
  }
}

// ---------------------------------------------------------------------------
// Step 4: categorical encoding

struct ColumnMeta {
  std::string name;
  bool categorical = false;
  std::vector<std::string> vocabulary;  // label i is vocabulary[i]
};

struct CleanDataset {
  std::vector<ColumnMeta> columns;            // feature columns only
  std::vector<std::vector<double>> features;  // rows x F
  std::vector<double> target;

  std::size_t feature_count() const { return columns.size(); }
  std::size_t row_count() const { return features.size(); }
};

inline bool is_numeric_column(const RawTable& table, std::size_t col) {
  for (const auto& row : table.rows)
    if (!parse_double(row[col])) return false;
  return true;
}

/// Dense integer labels in first-appearance order; the vocabulary is kept so
/// unseen values at scoring time map to the reserved label V (vocab size).
inline CleanDataset encode_categoricals(const RawTable& table,
                                        const std::vector<std::string>& numeric_columns,
                                        const std::string& target_column,
                                        CleaningReport& report) {
  auto tidx = table.column_index(target_column);
  if (!tidx) throw ConfigError("target column '" + target_column + "' not found");
  std::set<std::string> numeric(numeric_columns.begin(), numeric_columns.end());
  CleanDataset ds;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c == *tidx) continue;
    feature_cols.push_back(c);
    ColumnMeta meta;
    meta.name = table.columns[c];
    meta.categorical = numeric.find(meta.name) == numeric.end();
    ds.columns.push_back(std::move(meta));
  }
  std::vector<std::map<std::string, std::size_t>> vocab_index(feature_cols.size());
  ds.features.resize(table.rows.size(), std::vector<double>(feature_cols.size()));
  ds.target.resize(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    ds.target[r] = *parse_double(row[*tidx]);
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      const std::string& cell = row[feature_cols[f]];
      if (!ds.columns[f].categorical) {
        auto v = parse_double(cell);
        if (!v)
          throw ConfigError("column '" + ds.columns[f].name +
                            "' declared numeric but cell '" + cell + "' does not parse");
        ds.features[r][f] = *v;
      } else {
        auto& vi = vocab_index[f];
        auto it = vi.find(cell);
        std::size_t label;
        if (it == vi.end()) {
          label = ds.columns[f].vocabulary.size();
          vi.emplace(cell, label);
          ds.columns[f].vocabulary.push_back(cell);
        } else {
          label = it->second;
        }
        ds.features[r][f] = static_cast<double>(label);
      }
    }
  }
  for (const auto& meta : ds.columns)
    if (meta.categorical) report.vocabularies.emplace_back(meta.name, meta.vocabulary);
  return ds;
}

/// Label for one cell under a frozen vocabulary; unseen values get the
/// reserved label V.
inline double encode_with_vocab(const ColumnMeta& meta, const std::string& cell) {
  if (!meta.categorical) {
    auto v = parse_double(cell);
    if (!v) throw ConfigError("non-numeric cell in numeric column " + meta.name);
    return *v;
  }
  for (std::size_t i = 0; i < meta.vocabulary.size(); ++i)
    if (meta.vocabulary[i] == cell) return static_cast<double>(i);
  return static_cast<double>(meta.vocabulary.size());
}

// ---------------------------------------------------------------------------
// Step 5: correlation pruning (Kendall tau-b)

struct KendallResult {
  double tau = 0.0;
  bool defined = true;  // false when either column is fully tied
};

namespace detail {

// Inversion count by merge sort; pairs with equal values are not inversions.
inline std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& tmp,
                                      std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t inv = count_inversions(v, tmp, lo, mid) + count_inversions(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += mid - i;
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
  return inv;
}

}  // namespace detail

/// Tie-corrected tau-b via the O(n log n) sort-and-count method.
inline KendallResult kendall_tau(const std::vector<double>& x,
                                 const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2)
    throw ConfigError("kendall_tau: needs two equal-length vectors of size >= 2");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });
  const std::uint64_t tot = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  std::uint64_t xtie = 0, xytie = 0;
  {
    std::size_t run = 1, runxy = 1;
    for (std::size_t i = 1; i < n; ++i) {
      if (x[order[i]] == x[order[i - 1]]) {
        ++run;
        if (y[order[i]] == y[order[i - 1]]) ++runxy;
        else {
          xytie += static_cast<std::uint64_t>(runxy) * (runxy - 1) / 2;
          runxy = 1;
        }
      } else {
        xtie += static_cast<std::uint64_t>(run) * (run - 1) / 2;
        xytie += static_cast<std::uint64_t>(runxy) * (runxy - 1) / 2;
        run = runxy = 1;
      }
    }
    xtie += static_cast<std::uint64_t>(run) * (run - 1) / 2;
    xytie += static_cast<std::uint64_t>(runxy) * (runxy - 1) / 2;
  }
  std::vector<double> ysorted(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) ysorted[i] = y[order[i]];
  const std::uint64_t discordant = detail::count_inversions(ysorted, tmp, 0, n);
  std::uint64_t ytie = 0;
  {
    // ysorted is now fully sorted by y
    std::size_t run = 1;
    for (std::size_t i = 1; i < n; ++i) {
      if (ysorted[i] == ysorted[i - 1]) ++run;
      else {
        ytie += static_cast<std::uint64_t>(run) * (run - 1) / 2;
        run = 1;
      }
    }
    ytie += static_cast<std::uint64_t>(run) * (run - 1) / 2;
  }
  if (xtie == tot || ytie == tot) return {0.0, false};
  const double numer = static_cast<double>(static_cast<std::int64_t>(tot) -
                                           static_cast<std::int64_t>(xtie) -
                                           static_cast<std::int64_t>(ytie) +
                                           static_cast<std::int64_t>(xytie) -
                                           2 * static_cast<std::int64_t>(discordant));
  const double denom = std::sqrt(static_cast<double>(tot - xtie)) *
                       std::sqrt(static_cast<double>(tot - ytie));
  return {numer / denom, true};
}

/// Scan in column order; drop a column whose |tau| against any already
/// retained column exceeds the threshold. Constant columns are dropped
/// outright (treated as |tau| = 1).
inline CleanDataset prune_correlated(const CleanDataset& ds, CleaningReport& report,
                                     double threshold = 0.7) {
  const std::size_t f_count = ds.feature_count();
  std::vector<std::vector<double>> cols(f_count, std::vector<double>(ds.row_count()));
  for (std::size_t r = 0; r < ds.row_count(); ++r)
    for (std::size_t f = 0; f < f_count; ++f) cols[f][r] = ds.features[r][f];
  std::vector<std::size_t> retained;
  for (std::size_t f = 0; f < f_count; ++f) {
    bool constant = ds.row_count() >= 2 &&
                    std::all_of(cols[f].begin(), cols[f].end(),
                                [&](double v) { return v == cols[f][0]; });
    if (constant) {
      report.dropped.push_back({ds.columns[f].name, "", 1.0});
      continue;
    }
    bool drop = false;
    for (std::size_t r : retained) {
      KendallResult kr = kendall_tau(cols[f], cols[r]);
      const double abs_tau = kr.defined ? std::abs(kr.tau) : 1.0;
      report.tau_pairs.emplace_back(ds.columns[f].name, ds.columns[r].name,
                                    kr.defined ? kr.tau : 1.0);
      if (abs_tau > threshold) {
        report.dropped.push_back({ds.columns[f].name, ds.columns[r].name,
                                  kr.defined ? kr.tau : 1.0});
        drop = true;
        break;
      }
    }
    if (!drop) retained.push_back(f);
  }
  CleanDataset out;
  out.target = ds.target;
  for (std::size_t f : retained) out.columns.push_back(ds.columns[f]);
  out.features.resize(ds.row_count(), std::vector<double>(retained.size()));
  for (std::size_t r = 0; r < ds.row_count(); ++r)
    for (std::size_t i = 0; i < retained.size(); ++i)
      out.features[r][i] = ds.features[r][retained[i]];
  for (const auto& c : out.columns) report.retained.push_back(c.name);
  return out;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
  double test_fraction = 0.2;
  double validation_fraction_of_train = 0.2;
  std::uint64_t seed = 0;
};

struct Splits {
  std::vector<std::size_t> train, validation, test;
};

inline Splits split_dataset(std::size_t rows, const SplitSpec& spec) {
  if (rows < 10) throw ConfigError("split: need at least 10 rows, got " + std::to_string(rows));
  std::vector<std::size_t> idx(rows);
  for (std::size_t i = 0; i < rows; ++i) idx[i] = i;
  std::mt19937_64 rng(spec.seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n_test = static_cast<std::size_t>(
      static_cast<double>(rows) * spec.test_fraction);
  const std::size_t n_rest = rows - n_test;
  const std::size_t n_val = static_cast<std::size_t>(
      static_cast<double>(n_rest) * spec.validation_fraction_of_train);
  Splits s;
  s.train.assign(idx.begin(), idx.begin() + (n_rest - n_val));
  s.validation.assign(idx.begin() + (n_rest - n_val), idx.begin() + n_rest);
  s.test.assign(idx.begin() + n_rest, idx.end());
  return s;
}

// ---------------------------------------------------------------------------
// Whole-pipeline driver and file formats

struct PipelineOptions {
  std::string target_column = "baseresult";
  std::vector<std::string> excluded_columns = {"peakresult", "disclosures"};
  std::vector<std::string> unit_columns = {"1stlevelcache", "2ndlevelcache",
                                           "3rdlevelcache", "othercache", "memory"};
  double correlation_threshold = 0.7;
  bool standardize = false;
};

struct PipelineResult {
  CleanDataset dataset;
  CleaningReport report;
};

inline void standardize_features(CleanDataset& ds) {
  const std::size_t f_count = ds.feature_count();
  for (std::size_t f = 0; f < f_count; ++f) {
    double mean = 0.0;
    for (const auto& row : ds.features) mean += row[f];
    mean /= static_cast<double>(ds.row_count());
    double var = 0.0;
    for (const auto& row : ds.features) var += (row[f] - mean) * (row[f] - mean);
    var /= static_cast<double>(ds.row_count());
    const double sd = std::sqrt(var);
    if (sd == 0.0) continue;
    for (auto& row : ds.features) row[f] = (row[f] - mean) / sd;
  }
}

inline PipelineResult run_pipeline(RawTable table, const PipelineOptions& opt = {}) {
  PipelineResult res;
  res.report.input_rows = table.rows.size();
  clean_alphanumeric(table, res.report);
  drop_zero_targets(table, opt.target_column, res.report);
  normalize_units(table, opt.unit_columns, res.report);
  // excluded columns (the other response variables and free text) are removed
  // from the feature set before encoding
  {
    std::set<std::string> excl(opt.excluded_columns.begin(), opt.excluded_columns.end());
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < table.columns.size(); ++c)
      if (excl.find(table.columns[c]) == excl.end()) keep.push_back(c);
    if (keep.size() != table.columns.size()) {
      RawTable pruned;
      pruned.source = table.source;
      for (std::size_t c : keep) pruned.columns.push_back(table.columns[c]);
      for (auto& row : table.rows) {
        std::vector<std::string> nr;
        nr.reserve(keep.size());
        for (std::size_t c : keep) nr.push_back(std::move(row[c]));
        pruned.rows.push_back(std::move(nr));
      }
      table = std::move(pruned);
    }
  }
  std::vector<std::string> numeric_columns;
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    if (is_numeric_column(table, c)) numeric_columns.push_back(table.columns[c]);
  CleanDataset encoded =
      encode_categoricals(table, numeric_columns, opt.target_column, res.report);
  res.dataset = prune_correlated(encoded, res.report, opt.correlation_threshold);
  if (opt.standardize) {
    standardize_features(res.dataset);
    res.report.standardized = true;
  }
  res.report.output_rows = res.dataset.row_count();
  return res;
}

inline void write_clean_csv(const CleanDataset& ds, std::ostream& out) {
  std::vector<std::string> header;
  for (const auto& c : ds.columns) header.push_back(c.name);
  header.push_back("baseresult");
  csv::write_row(out, header);
  for (std::size_t r = 0; r < ds.row_count(); ++r) {
    std::vector<std::string> row;
    row.reserve(header.size());
    for (double v : ds.features[r]) row.push_back(format_double(v));
    row.push_back(format_double(ds.target[r]));
    csv::write_row(out, row);
  }
}

/// Reads a cleaned (all-numeric) dataset; the target column is `baseresult`.
inline CleanDataset read_clean_csv(const std::string& path) {
  RawTable t = raw_table_from_csv(path);
  auto tidx = t.column_index("baseresult");
  if (!tidx) throw ConfigError("cleaned CSV missing 'baseresult' column: " + path);
  CleanDataset ds;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c == *tidx) continue;
    ColumnMeta meta;
    meta.name = t.columns[c];
    ds.columns.push_back(std::move(meta));
  }
  ds.features.resize(t.rows.size(), std::vector<double>(ds.columns.size()));
  ds.target.resize(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto tv = parse_double(t.rows[r][*tidx]);
    if (!tv) throw ConfigError("cleaned CSV has non-numeric target at row " + std::to_string(r));
    ds.target[r] = *tv;
    std::size_t f = 0;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (c == *tidx) continue;
      auto v = parse_double(t.rows[r][c]);
      if (!v) throw ConfigError("cleaned CSV has non-numeric cell at row " + std::to_string(r));
      ds.features[r][f++] = *v;
    }
  }
  return ds;
}

inline void write_report(const CleaningReport& rep, std::ostream& out) {
  out << "input_rows: " << rep.input_rows << "\n";
  out << "characters_stripped: " << rep.characters_stripped << "\n";
  out << "zero_target_rows_removed: " << rep.zero_target_rows_removed << "\n";
  out << "unparseable_target_rows_removed: " << rep.unparseable_target_rows_removed << "\n";
  for (const auto& u : rep.units)
    out << "units." << u.column << ": converted=" << u.converted
        << " failed=" << u.failed << "\n";
  for (const auto& [col, vocab] : rep.vocabularies) {
    out << "vocabulary." << col << ":";
    for (const auto& label : vocab) out << " [" << label << "]";
    out << "\n";
  }
  char buf[32];
  for (const auto& [a, b, tau] : rep.tau_pairs) {
    std::snprintf(buf, sizeof buf, "%.6f", tau);
    out << "tau." << a << "." << b << ": " << buf << "\n";
  }
  for (const auto& d : rep.dropped) {
    std::snprintf(buf, sizeof buf, "%.6f", d.tau);
    out << "dropped." << d.column << ": partner=" << (d.partner.empty() ? "-" : d.partner)
        << " tau=" << buf << "\n";
  }
  out << "retained:";
  for (const auto& c : rep.retained) out << " " << c;
  out << "\n";
  out << "output_rows: " << rep.output_rows << "\n";
  out << "standardized: " << (rep.standardized ? "true" : "false") << "\n";
}

}  // namespace benchnet
