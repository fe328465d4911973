#pragma once

/**
 * @file sweeper.hpp
 * @brief Accuracy-vs-n sweeps, the capacity rule, and capacity reporting.
 *
 * A sweep embeds the same payload with the same seed for every n, rebuilds
 * the model from the modified store, and scores it on one fixed test set.
 * The per-weight capacity n* is the largest n such that every swept m <= n
 * stays within `threshold` accuracy points of the n = 0 baseline.
 *
 * Units are decimal (1 KB = 1000 B, 1 MB = 10^6 B). Capacity strings are
 * rounded half-up from the exact bit count, never through floating point.
 */

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "stegcap/corpus.hpp"
#include "stegcap/error.hpp"
#include "stegcap/models.hpp"
#include "stegcap/stego_codec.hpp"
#include "stegcap/random.hpp"
#include "stegcap/weight_store.hpp"

namespace stegcap {

struct SweepRow {
  unsigned n = 0;
  double accuracy = 0.0;
  double cumulative_capacity_bytes = 0.0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepResult {
  std::string selector;
  std::uint64_t weight_count = 0;
  std::vector<SweepRow> rows;  // sorted by n, unique, includes n = 0

  double baseline() const {
    if (rows.empty() || rows.front().n != 0) throw Error(ErrorCode::InvalidSweep, "sweep has no n = 0 row");
    return rows.front().accuracy;
  }
};

struct CapacityReport {
  unsigned n_star = 0;
  unsigned bits_per_weight = 0;
  std::uint64_t weight_count = 0;
  std::uint64_t total_bits = 0;
  double total_bytes = 0.0;
  std::string human;
};

/// Decimal n.dd rendering of total_bits/(8 * unit_bytes), rounded half-up exactly.
inline std::string format_units(std::uint64_t total_bits, std::uint64_t unit_bytes, const char* suffix) {
  const uint128 denom = static_cast<uint128>(8) * unit_bytes;
  const uint128 hundredths = (static_cast<uint128>(total_bits) * 200 + denom) / (2 * denom);
  const auto whole = static_cast<std::uint64_t>(hundredths / 100);
  const auto frac = static_cast<unsigned>(hundredths % 100);
  std::ostringstream s;
  s << whole << '.' << std::setw(2) << std::setfill('0') << frac << ' ' << suffix;
  return s.str();
}

/// "x.xx MB" at or above 10^6 bytes, otherwise "x.xx KB".
inline std::string human_capacity(std::uint64_t total_bits) {
  if (total_bits >= 8'000'000ULL) return format_units(total_bits, 1'000'000, "MB");
  return format_units(total_bits, 1'000, "KB");
}

inline CapacityReport capacity_arithmetic(unsigned bits_per_weight, std::uint64_t weight_count) {
  CapacityReport r;
  r.n_star = bits_per_weight;
  r.bits_per_weight = bits_per_weight;
  r.weight_count = weight_count;
  r.total_bits = static_cast<std::uint64_t>(bits_per_weight) * weight_count;
  r.total_bytes = static_cast<double>(r.total_bits) / 8.0;
  r.human = human_capacity(r.total_bits);
  return r;
}

/// Combined capacity of several weight groups with different per-weight capacities.
struct CapacityTotal {
  std::uint64_t weight_count = 0;
  std::uint64_t total_bits = 0;
  double total_bytes = 0.0;
  std::string human;
};

inline CapacityTotal combine_capacity(const std::vector<CapacityReport>& parts) {
  CapacityTotal t;
  for (const auto& p : parts) {
    t.weight_count += p.weight_count;
    t.total_bits += p.total_bits;
  }
  t.total_bytes = static_cast<double>(t.total_bits) / 8.0;
  t.human = human_capacity(t.total_bits);
  return t;
}

/// Capacity value in the unit its human string uses (KB or MB).
inline double capacity_in_display_unit(std::uint64_t total_bits) {
  const double bytes = static_cast<double>(total_bits) / 8.0;
  return total_bits >= 8'000'000ULL ? bytes / 1e6 : bytes / 1e3;
}

inline CapacityReport capacity_from_sweep(const SweepResult& result, double threshold = 0.01) {
  const double floor = result.baseline() - threshold;
  // Tolerance for accuracies printed to a few decimals (0.89 vs 0.9 - 0.01).
  constexpr double kSlack = 1e-12;
  unsigned n_star = 0;
  for (const auto& row : result.rows) {
    if (row.accuracy + kSlack < floor) break;
    n_star = row.n;
  }
  CapacityReport r = capacity_arithmetic(n_star, result.weight_count);
  return r;
}

inline std::vector<unsigned> normalize_range(std::vector<unsigned> n_range) {
  std::sort(n_range.begin(), n_range.end());
  n_range.erase(std::unique(n_range.begin(), n_range.end()), n_range.end());
  if (n_range.empty() || n_range.front() != 0) throw Error(ErrorCode::InvalidSweep, "n range must include 0");
  if (n_range.back() > 32) throw Error(ErrorCode::InvalidSweep, "n range must lie within [0, 32]");
  return n_range;
}

inline std::vector<unsigned> full_range() {
  std::vector<unsigned> r(33);
  for (unsigned i = 0; i <= 32; ++i) r[i] = i;
  return r;
}

/// Parses "a..b" (inclusive) or a comma list such as "0,8,16,32" into
/// sorted, unique values in [0, 32].
inline std::vector<unsigned> parse_range(const std::string& text) {
  std::vector<unsigned> out;
  auto to_uint = [&](std::string_view s) {
    unsigned v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v > 32) {
      throw Error(ErrorCode::ParseError, "bad n range '" + text + "'");
    }
    return v;
  };
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const unsigned lo = to_uint(std::string_view(text).substr(0, dots));
    const unsigned hi = to_uint(std::string_view(text).substr(dots + 2));
    if (lo > hi) throw Error(ErrorCode::ParseError, "empty n range '" + text + "'");
    for (unsigned i = lo; i <= hi; ++i) out.push_back(i);
    return out;
  }
  std::string_view rest(text);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    out.push_back(to_uint(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Scores a modified store; must be safe to call concurrently.
using StoreEvaluator = std::function<double(const WeightStore&)>;

/// Generic sweep driver. Evaluations for different n run on up to
/// `threads` workers; rows are merged by n, so output never depends on scheduling.
inline SweepResult run_sweep_with(const WeightStore& store, const Selector& sel, const StoreEvaluator& evaluator,
                                  std::span<const std::uint8_t> payload, std::uint64_t seed,
                                  std::vector<unsigned> n_range, unsigned threads = 0) {
  n_range = normalize_range(std::move(n_range));
  SweepResult result;
  result.selector = sel.describe();
  result.weight_count = count_selected(store, sel);
  result.rows.resize(n_range.size());

  auto run_one = [&](std::size_t i) {
    const unsigned n = n_range[i];
    try {
      const auto modified = embed_fill(store, sel, BitPlan{n, EmbedMode::Fill, seed}, payload);
      const double acc = evaluator(modified);
      result.rows[i] = {n, acc, static_cast<double>(n) * static_cast<double>(result.weight_count) / 8.0};
    } catch (const Error& e) {
      throw Error(e.code(), "sweep failed at n = " + std::to_string(n) + ": " + e.what());
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n_range.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n_range.size(); ++i) run_one(i);
    return result;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> workers;
  for (unsigned t = 0; t < threads; ++t) {
    workers.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < n_range.size(); i = next++) run_one(i);
    }));
  }
  for (auto& w : workers) w.get();
  return result;
}

inline SweepResult run_sweep(const WeightStore& store, const Selector& sel, ModelKind kind, const Dataset& test,
                             std::span<const std::uint8_t> payload, std::uint64_t seed,
                             std::vector<unsigned> n_range = full_range(), unsigned threads = 0) {
  const StoreEvaluator evaluator = [&](const WeightStore& s) { return evaluate(import_weights(kind, s), test).accuracy; };
  return run_sweep_with(store, sel, evaluator, payload, seed, std::move(n_range), threads);
}

// ---------------------------------------------------------------------------
// Graph CSV: n,accuracy,capacity_kb

namespace detail {

inline std::string shortest(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline double parse_double(std::string_view s, const std::string& context) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, "bad number '" + std::string(s) + "' in " + context);
  }
  return v;
}

inline unsigned parse_n(std::string_view s, const std::string& context) {
  unsigned v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v > 32) {
    throw Error(ErrorCode::ParseError, "bad n '" + std::string(s) + "' in " + context);
  }
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string_view rest(line);
  for (;;) {
    const auto comma = rest.find(',');
    out.emplace_back(rest.substr(0, comma));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

/// Data lines of a CSV, skipping '#' comments and checking the header.
inline std::vector<std::vector<std::string>> read_csv(std::istream& in, const std::string& header,
                                                      const std::string& context) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != header) throw Error(ErrorCode::ParseError, context + ": expected header '" + header + "'");
      header_seen = true;
      continue;
    }
    rows.push_back(split_csv(line));
  }
  if (!header_seen) throw Error(ErrorCode::ParseError, context + ": missing header");
  return rows;
}

class CountingSink {
 public:
  explicit CountingSink(std::ostream& out) : out_(out) {}
  void put(const std::string& s) {
    out_ << s;
    if (!out_) throw Error(ErrorCode::Io, "write to sink failed");
    count_ += s.size();
  }
  std::size_t count() const { return count_; }

 private:
  std::ostream& out_;
  std::size_t count_ = 0;
};

}  // namespace detail

/// Capacity in KB with six decimals; bits/8/1000 * 10^6 = bits * 125 exactly.
inline std::string capacity_kb_field(unsigned n, std::uint64_t weight_count) {
  const std::uint64_t micro_kb = static_cast<std::uint64_t>(n) * weight_count * 125;
  std::ostringstream s;
  s << micro_kb / 1'000'000 << '.' << std::setw(6) << std::setfill('0') << micro_kb % 1'000'000;
  return s.str();
}

inline std::size_t emit_graph_csv(const SweepResult& result, std::ostream& sink) {
  detail::CountingSink out(sink);
  out.put("n,accuracy,capacity_kb\n");
  for (const auto& row : result.rows) {
    out.put(std::to_string(row.n) + ',' + detail::shortest(row.accuracy) + ',' +
            capacity_kb_field(row.n, result.weight_count) + '\n');
  }
  return out.count();
}

/// Inverse of emit_graph_csv; the weight count is recovered from any n > 0 row.
inline SweepResult parse_graph_csv(std::istream& in, std::string selector = {}) {
  SweepResult result;
  result.selector = std::move(selector);
  for (const auto& f : detail::read_csv(in, "n,accuracy,capacity_kb", "graph CSV")) {
    if (f.size() != 3) throw Error(ErrorCode::ParseError, "graph CSV rows need 3 fields");
    const unsigned n = detail::parse_n(f[0], "graph CSV");
    const double acc = detail::parse_double(f[1], "graph CSV");
    const double kb = detail::parse_double(f[2], "graph CSV");
    const double bytes = std::round(kb * 1000.0 * 8.0) / 8.0;
    if (n > 0 && result.weight_count == 0) {
      result.weight_count = static_cast<std::uint64_t>(std::llround(bytes * 8.0 / n));
    }
    result.rows.push_back({n, acc, bytes});
  }
  std::sort(result.rows.begin(), result.rows.end(), [](const auto& a, const auto& b) { return a.n < b.n; });
  return result;
}

// ---------------------------------------------------------------------------
// Summary table

struct SummaryEntry {
  std::string label;
  std::string layers;
  CapacityReport report;
};

inline std::string group_thousands(std::uint64_t v) {
  std::string digits = std::to_string(v);
  std::string out;
  const std::size_t lead = digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && (i % 3) == lead % 3) out += ',';
    out += digits[i];
  }
  return out;
}

/// Aligned text table: Model, Layers, Weights, Bits/weight, Total.
inline std::size_t emit_summary(const std::vector<SummaryEntry>& entries, std::ostream& sink) {
  std::vector<std::array<std::string, 5>> rows;
  rows.push_back({"Model", "Layers", "Weights", "Bits", "Total"});
  for (const auto& e : entries) {
    rows.push_back({e.label, e.layers, group_thousands(e.report.weight_count),
                    std::to_string(e.report.bits_per_weight), e.report.human});
  }
  std::array<std::size_t, 5> width{};
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], r[c].size());
  }
  detail::CountingSink out(sink);
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < 5; ++c) {
      const std::size_t pad = width[c] - r[c].size();
      if (c > 0) line += "  ";
      // Text columns left-aligned, numeric columns right-aligned.
      if (c < 2) {
        line += r[c] + std::string(pad, ' ');
      } else {
        line += std::string(pad, ' ') + r[c];
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out.put(line + '\n');
  }
  return out.count();
}

struct ReferenceModel {
  const char* label;
  const char* layers;
  std::uint64_t weights;
  unsigned bits_per_weight;
};

/// Weight counts and per-weight capacities of the ten reference model
/// configurations; only the first three are trainable in this toolkit.
inline constexpr std::array<ReferenceModel, 10> kReferenceModels = {{
    {"LR", "All", 2560, 22},
    {"SVM", "All", 26703, 27},
    {"MLP", "All", 34148, 19},
    {"CNN", "All", 1489674, 20},
    {"LSTM", "All", 1119626, 24},
    {"VGG16", "Trained", 5130, 21},
    {"DenseNet121", "Trained", 700106, 20},
    {"InceptionV3", "Trained", 2107392, 25},
    {"Xception", "Trained", 34176, 20},
    {"ACGAN", "Discriminator", 118026, 20},
}};

// ---------------------------------------------------------------------------
// External evaluator exchange
//
// out_dir/store_nNN.wstg for every n, plus out_dir/manifest.csv (`n,path`).
// An evaluator answers with results.csv (`n,accuracy`).

struct ExternalStore {
  unsigned n = 0;
  std::string path;  // relative to the exchange directory
};

inline std::string store_file_name(unsigned n) {
  std::ostringstream s;
  s << "store_n" << std::setw(2) << std::setfill('0') << n << ".wstg";
  return s.str();
}

inline std::vector<ExternalStore> export_sweep_stores(const WeightStore& store, const Selector& sel,
                                                      std::span<const std::uint8_t> payload, std::uint64_t seed,
                                                      std::vector<unsigned> n_range,
                                                      const std::filesystem::path& out_dir,
                                                      const std::vector<std::string>& comment = {}) {
  n_range = normalize_range(std::move(n_range));
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + out_dir.string() + "': " + ec.message());
  std::vector<ExternalStore> manifest;
  for (unsigned n : n_range) {
    const auto modified = embed_fill(store, sel, BitPlan{n, EmbedMode::Fill, seed}, payload);
    const std::string name = store_file_name(n);
    save_store(modified, (out_dir / name).string());
    manifest.push_back({n, name});
  }
  std::ofstream m(out_dir / "manifest.csv", std::ios::binary | std::ios::trunc);
  for (const auto& line : comment) m << "# " << line << '\n';
  m << "# selector=" << sel.describe() << " weight_count=" << count_selected(store, sel) << '\n';
  m << "n,path\n";
  for (const auto& e : manifest) m << e.n << ',' << e.path << '\n';
  if (!m) throw Error(ErrorCode::Io, "failed writing exchange manifest");
  return manifest;
}

inline std::vector<ExternalStore> read_exchange_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.csv");
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + (dir / "manifest.csv").string() + "'");
  std::vector<ExternalStore> out;
  for (const auto& f : detail::read_csv(in, "n,path", "exchange manifest")) {
    if (f.size() != 2) throw Error(ErrorCode::ParseError, "manifest rows need 2 fields");
    out.push_back({detail::parse_n(f[0], "exchange manifest"), f[1]});
  }
  return out;
}

inline void write_results_csv(const std::vector<std::pair<unsigned, double>>& results, std::ostream& out) {
  out << "n,accuracy\n";
  for (const auto& [n, acc] : results) out << n << ',' << detail::shortest(acc) << '\n';
}

/// Builds a SweepResult from an evaluator's `n,accuracy` response.
inline SweepResult ingest_results(std::istream& in, std::uint64_t weight_count, std::string selector = {}) {
  std::map<unsigned, double> by_n;
  for (const auto& f : detail::read_csv(in, "n,accuracy", "results CSV")) {
    if (f.size() != 2) throw Error(ErrorCode::ParseError, "results rows need 2 fields");
    const unsigned n = detail::parse_n(f[0], "results CSV");
    const double acc = detail::parse_double(f[1], "results CSV");
    if (!(acc >= 0.0 && acc <= 1.0)) throw Error(ErrorCode::ParseError, "accuracy outside [0, 1] at n = " + f[0]);
    if (!by_n.emplace(n, acc).second) throw Error(ErrorCode::ParseError, "duplicate n = " + f[0]);
  }
  SweepResult result;
  result.selector = std::move(selector);
  result.weight_count = weight_count;
  for (const auto& [n, acc] : by_n) {
    result.rows.push_back({n, acc, static_cast<double>(n) * static_cast<double>(weight_count) / 8.0});
  }
  if (result.rows.empty() || result.rows.front().n != 0) {
    throw Error(ErrorCode::InvalidSweep, "results must include n = 0");
  }
  return result;
}

/// key=value rendering of a capacity report.
inline std::string format_capacity_text(const CapacityReport& r, double baseline, double threshold) {
  std::ostringstream s;
  s << "n_star=" << r.n_star << '\n'
    << "bits_per_weight=" << r.bits_per_weight << '\n'
    << "weight_count=" << r.weight_count << '\n'
    << "total_bits=" << r.total_bits << '\n'
    << "total_bytes=" << detail::shortest(r.total_bytes) << '\n'
    << "capacity=" << r.human << '\n'
    << "baseline_accuracy=" << detail::shortest(baseline) << '\n'
    << "threshold=" << detail::shortest(threshold) << '\n';
  return s.str();
}

}  // namespace stegcap
