// stegcap: command-line driver for corpus generation, training, embedding,
// extraction, capacity sweeps and capacity reports.
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage error, 3 capacity exceeded.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stegcap/stegcap.hpp"

namespace fs = std::filesystem;
using namespace stegcap;

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

/// Thrown for flag combinations CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string g_command_line;

std::vector<std::string> provenance(std::uint64_t seed) {
  return {g_command_line, "seed=" + std::to_string(seed)};
}

void write_comments(std::ostream& out, std::uint64_t seed) {
  for (const auto& line : provenance(seed)) out << "# " << line << '\n';
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  return out;
}

/// `dir/stem + suffix` for an input path.
std::string sibling_path(const std::string& path, const std::string& suffix) {
  const fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

std::pair<Dataset, Dataset> load_split(const std::string& corpus, const std::string& features, double test_fraction,
                                       std::uint64_t seed) {
  auto [samples, names] = load_corpus(corpus);
  const Dataset all = featurize(samples, FeatureConfig::parse(features), names);
  return split(all, test_fraction, seed, true);
}

void write_confusion(const std::string& path, const EvalReport& report, const std::vector<std::string>& names,
                     std::uint64_t seed) {
  auto out = open_out(path);
  write_comments(out, seed);
  out << "# accuracy=" << report.accuracy << '\n';
  out << "true\\predicted";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    out << names[i];
    for (std::size_t j = 0; j < kNumClasses; ++j) out << ',' << report.confusion[i][j];
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

struct GenCorpusArgs {
  std::string out;
  std::uint64_t seed = kDefaultSeed;
  int families = kNumClasses;
  double scale = 0.1;
  double concentration = CorpusSpec::kDefaultConcentration;
  std::size_t min_bytes = 4096;
  std::size_t max_bytes = 8192;
};

int cmd_gen_corpus(const GenCorpusArgs& a) {
  if (a.families != kNumClasses) throw UsageError("--families must be 10");
  CorpusSpec spec = CorpusSpec::reference(a.seed, a.scale, a.concentration);
  spec.min_bytes = a.min_bytes;
  spec.max_bytes = a.max_bytes;
  try {
    spec.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  gen_corpus(spec, a.out, provenance(a.seed));
  std::cout << "# seed=" << a.seed << '\n';
  std::cout << std::left << std::setw(14) << "family" << std::right << std::setw(8) << "samples" << '\n';
  for (const auto& f : spec.families) {
    std::cout << std::left << std::setw(14) << f.name << std::right << std::setw(8) << f.sample_count << '\n';
  }
  std::cout << std::left << std::setw(14) << "total" << std::right << std::setw(8) << spec.total_samples() << '\n';
  return 0;
}

struct TrainArgs {
  std::string model;
  std::string features = "hist";
  std::string corpus;
  std::string out;
  std::string confusion;
  std::uint64_t seed = kDefaultSeed;
  double test_fraction = 0.2;
  bool grid = false;
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  std::optional<double> l2;
  std::optional<int> batch_size;
  std::vector<int> hidden;
};

int cmd_train(const TrainArgs& a) {
  Hyperparameters hp = Hyperparameters::defaults(parse_model_kind(a.model));
  hp.seed = a.seed;
  if (a.epochs) hp.epochs = *a.epochs;
  if (a.learning_rate) hp.learning_rate = *a.learning_rate;
  if (a.l2) hp.l2 = *a.l2;
  if (a.batch_size) hp.batch_size = *a.batch_size;
  if (!a.hidden.empty()) hp.hidden_sizes = a.hidden;
  hp.validate();

  auto [train_set, test_set] = load_split(a.corpus, a.features, a.test_fraction, a.seed);
  std::cout << "# seed=" << a.seed << '\n';

  if (a.grid) {
    auto [fit_set, val_set] = split(train_set, 0.2, mix_seed(a.seed, 7), true);
    std::vector<Hyperparameters> grid;
    switch (hp.kind) {
      case ModelKind::LogisticRegression: grid = lr_reference_grid(hp, fit_set.size()); break;
      case ModelKind::LinearSvm: grid = svm_reference_grid(hp, fit_set.size()); break;
      case ModelKind::Mlp: grid = mlp_reference_grid(hp); break;
    }
    const auto gs = grid_search(fit_set, val_set, grid);
    std::cout << "best  val_accuracy  hyperparameters\n";
    for (std::size_t i = 0; i < gs.cells.size(); ++i) {
      const auto& c = gs.cells[i];
      std::ostringstream acc;
      if (c.accuracy) {
        acc << std::fixed << std::setprecision(4) << *c.accuracy;
      } else {
        acc << "failed";
      }
      std::cout << (i == gs.best_index ? "  *   " : "      ") << std::left << std::setw(14) << acc.str()
                << c.hp.describe() << '\n';
    }
    hp = gs.best;
  }

  const TrainedModel model = train(train_set, hp);
  const EvalReport report = evaluate(model, test_set);
  save_store(export_weights(model), a.out);
  const std::string confusion = a.confusion.empty() ? sibling_path(a.out, ".confusion.csv") : a.confusion;
  write_confusion(confusion, report, train_set.class_names, a.seed);
  std::cout << "model=" << to_string(hp.kind) << " features=" << a.features << " weights=" << model.weight_count()
            << '\n'
            << "hyperparameters: " << hp.describe() << '\n'
            << "test_accuracy=" << report.accuracy << '\n'
            << "wrote " << a.out << " and " << confusion << '\n';
  return 0;
}

struct EmbedArgs {
  std::string store;
  std::string out;
  std::string select = "all";
  unsigned bits = 0;
  std::string mode = "fill";
  std::string payload;
  std::uint64_t seed = kDefaultSeed;
};

int cmd_embed(const EmbedArgs& a) {
  const WeightStore store = load_store(a.store);
  const Selector sel = Selector::parse(a.select);
  std::vector<std::uint8_t> payload;
  if (!a.payload.empty()) payload = read_file(a.payload);
  WeightStore out;
  if (a.mode == "fill") {
    out = embed_fill(store, sel, BitPlan{a.bits, EmbedMode::Fill, a.seed}, payload);
  } else if (a.mode == "message") {
    if (a.payload.empty()) throw UsageError("--mode message requires --payload");
    out = embed_message(store, sel, BitPlan{a.bits, EmbedMode::Message, a.seed}, payload);
  } else {
    throw UsageError("--mode must be fill or message");
  }
  save_store(out, a.out);
  std::cout << "embedded " << (a.mode == "fill" ? bits_available(store, sel, a.bits) : frame_bits(payload.size()))
            << " bits into " << count_selected(store, sel) << " weights (n=" << a.bits << ", seed=" << a.seed << ")\n";
  return 0;
}

struct ExtractArgs {
  std::string store;
  std::string out;
  std::string select = "all";
  unsigned bits = 1;
};

int cmd_extract(const ExtractArgs& a) {
  const auto payload = extract_message(load_store(a.store), Selector::parse(a.select), a.bits);
  write_file(a.out, payload);
  std::cout << "extracted " << payload.size() << " bytes\n";
  return 0;
}

struct SweepArgs {
  std::string store;
  std::string model;
  std::string corpus;
  std::string features = "hist";
  std::string select = "all";
  std::string payload;
  std::string range = "0..32";
  std::string out;
  std::string capacity_out;
  std::string emit_stores;
  std::string ingest;
  std::uint64_t seed = kDefaultSeed;
  double test_fraction = 0.2;
  double threshold = 0.01;
  unsigned threads = 0;
};

int cmd_sweep(const SweepArgs& a) {
  const WeightStore store = load_store(a.store);
  const Selector sel = Selector::parse(a.select);
  const auto n_range = parse_range(a.range);
  std::vector<std::uint8_t> payload;
  if (!a.payload.empty()) payload = read_file(a.payload);

  if (!a.emit_stores.empty()) {
    const auto manifest = export_sweep_stores(store, sel, payload, a.seed, n_range, a.emit_stores, provenance(a.seed));
    std::cout << "# seed=" << a.seed << '\n'
              << "wrote " << manifest.size() << " stores and manifest.csv to " << a.emit_stores << '\n'
              << "score each store and write results.csv (n,accuracy), then run sweep --ingest " << a.emit_stores
              << '\n';
    return 0;
  }

  SweepResult result;
  if (!a.ingest.empty()) {
    std::ifstream in(fs::path(a.ingest) / "results.csv");
    if (!in) throw Error(ErrorCode::Io, "cannot open results.csv in '" + a.ingest + "'");
    result = ingest_results(in, count_selected(store, sel), sel.describe());
  } else {
    if (a.corpus.empty()) throw UsageError("sweep needs --corpus (or --emit-stores / --ingest)");
    ModelKind kind;
    if (!a.model.empty()) {
      kind = parse_model_kind(a.model);
    } else if (auto inferred = infer_model_kind(store)) {
      kind = *inferred;
    } else {
      throw UsageError("cannot infer the model kind from the store; pass --model");
    }
    auto [train_set, test_set] = load_split(a.corpus, a.features, a.test_fraction, a.seed);
    result = run_sweep(store, sel, kind, test_set, payload, a.seed, n_range, a.threads);
  }

  const CapacityReport report = capacity_from_sweep(result, a.threshold);
  const std::string csv_path = a.out.empty() ? sibling_path(a.store, "_sweep.csv") : a.out;
  const std::string cap_path = a.capacity_out.empty() ? sibling_path(a.store, "_capacity.txt") : a.capacity_out;
  {
    auto out = open_out(csv_path);
    write_comments(out, a.seed);
    out << "# selector=" << result.selector << " weight_count=" << result.weight_count << '\n';
    emit_graph_csv(result, out);
  }
  const std::string text = format_capacity_text(report, result.baseline(), a.threshold);
  {
    auto out = open_out(cap_path);
    write_comments(out, a.seed);
    out << "selector=" << result.selector << '\n' << text;
  }
  std::cout << "# seed=" << a.seed << '\n' << "selector=" << result.selector << '\n' << text;
  std::cout << "wrote " << csv_path << " and " << cap_path << '\n';
  return 0;
}

struct ReportArgs {
  std::vector<std::string> arith;
  std::vector<std::string> sweeps;
  std::vector<std::string> labels;
  std::vector<std::string> layers;
  double threshold = 0.01;
  bool reference = false;
  std::string out;
};

int cmd_report(const ReportArgs& a) {
  std::vector<SummaryEntry> entries;
  std::size_t k = 0;
  auto next_label = [&](const std::string& fallback) {
    const std::string label = k < a.labels.size() ? a.labels[k] : fallback;
    const std::string layers = k < a.layers.size() ? a.layers[k] : "All";
    ++k;
    return std::pair{label, layers};
  };
  if (a.reference) {
    for (const auto& m : kReferenceModels) {
      entries.push_back({m.label, m.layers, capacity_arithmetic(m.bits_per_weight, m.weights)});
    }
  }
  for (const auto& spec : a.arith) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw UsageError("--arith expects BITS:WEIGHTS, got '" + spec + "'");
    unsigned bits = 0;
    std::uint64_t weights = 0;
    try {
      bits = static_cast<unsigned>(std::stoul(spec.substr(0, colon)));
      std::string w = spec.substr(colon + 1);
      std::erase(w, ',');
      weights = std::stoull(w);
    } catch (const std::exception&) {
      throw UsageError("--arith expects BITS:WEIGHTS, got '" + spec + "'");
    }
    if (bits > 32) throw UsageError("bits per weight must be in [0, 32]");
    auto [label, layers] = next_label(spec);
    entries.push_back({label, layers, capacity_arithmetic(bits, weights)});
  }
  for (const auto& path : a.sweeps) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    const SweepResult result = parse_graph_csv(in);
    auto [label, layers] = next_label(fs::path(path).stem().string());
    entries.push_back({label, layers, capacity_from_sweep(result, a.threshold)});
  }

  std::ostringstream text;
  emit_summary(entries, text);
  if (a.reference) {
    const auto inception = combine_capacity({capacity_arithmetic(14, 21'802'784), capacity_arithmetic(25, 2'107'392)});
    const auto vgg = capacity_arithmetic(20, 14'719'818);
    text << "\nAll-weights totals\n"
         << "InceptionV3  14 x 21,802,784 + 25 x 2,107,392  " << inception.human << '\n'
         << "VGG16        20 x 14,719,818                    " << vgg.human << '\n';
  }
  if (a.out.empty()) {
    std::cout << text.str();
  } else {
    auto out = open_out(a.out);
    out << "# " << g_command_line << '\n' << text.str();
  }
  return 0;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::CapacityExceeded: return 3;
    case ErrorCode::ParseError:
    case ErrorCode::InvalidPlan:
    case ErrorCode::InvalidCorpusSpec:
    case ErrorCode::InvalidHyperparameters:
    case ErrorCode::InvalidSweep:
    case ErrorCode::UnknownTensorName: return 2;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_command_line += (i ? " " : "") + std::string(i ? argv[i] : "stegcap");

  CLI::App app{"Steganographic capacity of trained model weights"};
  app.require_subcommand(1);

  GenCorpusArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Generate the synthetic 10-family corpus");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--families", gen.families, "Number of families (must be 10)")->capture_default_str();
  gen_cmd->add_option("--scale", gen.scale, "Fraction of the reference family counts")->capture_default_str();
  gen_cmd->add_option("--concentration", gen.concentration, "Dirichlet concentration per family")
      ->capture_default_str();
  gen_cmd->add_option("--min-bytes", gen.min_bytes, "Smallest file size (>= 4096)")->capture_default_str();
  gen_cmd->add_option("--max-bytes", gen.max_bytes, "Largest file size")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier and export its weights");
  train_cmd->add_option("--model", tr.model, "lr, svm or mlp")->required()->check(CLI::IsMember({"lr", "svm", "mlp"}));
  train_cmd->add_option("--features", tr.features, "hist, image or seq")
      ->capture_default_str()
      ->check(CLI::IsMember({"hist", "image", "seq"}));
  train_cmd->add_option("--corpus", tr.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", tr.out, "Output WSTG file")->required();
  train_cmd->add_option("--confusion", tr.confusion, "Confusion CSV (default <out>.confusion.csv)");
  train_cmd->add_option("--seed", tr.seed, "Seed for split and initialization")->capture_default_str();
  train_cmd->add_option("--test-fraction", tr.test_fraction, "Held-out fraction")->capture_default_str();
  train_cmd->add_flag("--grid", tr.grid, "Grid-search hyperparameters on a validation split");
  train_cmd->add_option("--epochs", tr.epochs, "Override epochs");
  train_cmd->add_option("--learning-rate", tr.learning_rate, "Override learning rate");
  train_cmd->add_option("--l2", tr.l2, "Override L2 strength");
  train_cmd->add_option("--batch-size", tr.batch_size, "Minibatch size (0 = full batch)");
  train_cmd->add_option("--hidden", tr.hidden, "MLP hidden sizes, e.g. 128,10")->delimiter(',');

  EmbedArgs em;
  auto* embed_cmd = app.add_subcommand("embed", "Overwrite the low-order bits of selected weights");
  embed_cmd->add_option("--store", em.store, "Input WSTG file")->required()->check(CLI::ExistingFile);
  embed_cmd->add_option("--out", em.out, "Output WSTG file")->required();
  embed_cmd->add_option("--select", em.select, "all, output, hidden, pretrained or name:a,b")->capture_default_str();
  embed_cmd->add_option("--bits", em.bits, "Low-order bits per weight (0-32)")->required()->check(CLI::Range(0, 32));
  embed_cmd->add_option("--mode", em.mode, "fill or message")
      ->capture_default_str()
      ->check(CLI::IsMember({"fill", "message"}));
  embed_cmd->add_option("--payload", em.payload, "Payload file")->check(CLI::ExistingFile);
  embed_cmd->add_option("--seed", em.seed, "Filler stream seed")->capture_default_str();

  ExtractArgs ex;
  auto* extract_cmd = app.add_subcommand("extract", "Recover a framed message");
  extract_cmd->add_option("--store", ex.store, "WSTG file")->required()->check(CLI::ExistingFile);
  extract_cmd->add_option("--out", ex.out, "Recovered payload file")->required();
  extract_cmd->add_option("--select", ex.select, "Selector used when embedding")->capture_default_str();
  extract_cmd->add_option("--bits", ex.bits, "Bits per weight used when embedding (1-32)")
      ->required()
      ->check(CLI::Range(1, 32));

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy versus overwritten bits, and the resulting capacity");
  sweep_cmd->add_option("--store", sw.store, "Trained WSTG file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--model", sw.model, "lr, svm or mlp (inferred from tensor names if omitted)")
      ->check(CLI::IsMember({"lr", "svm", "mlp"}));
  sweep_cmd->add_option("--corpus", sw.corpus, "Corpus directory (same split as train)")
      ->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--features", sw.features, "hist, image or seq")
      ->capture_default_str()
      ->check(CLI::IsMember({"hist", "image", "seq"}));
  sweep_cmd->add_option("--select", sw.select, "all, output, hidden, pretrained or name:a,b")->capture_default_str();
  sweep_cmd->add_option("--payload", sw.payload, "Payload file (default: seeded filler bits)")
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--range", sw.range, "n values: a..b or comma list")->capture_default_str();
  sweep_cmd->add_option("--threshold", sw.threshold, "Allowed absolute accuracy drop")->capture_default_str();
  sweep_cmd->add_option("--out", sw.out, "Graph CSV (default <store>_sweep.csv)");
  sweep_cmd->add_option("--capacity-out", sw.capacity_out, "Capacity text (default <store>_capacity.txt)");
  sweep_cmd->add_option("--emit-stores", sw.emit_stores, "Write one store per n for an external evaluator");
  sweep_cmd->add_option("--ingest", sw.ingest, "Read results.csv from an exchange directory")
      ->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--seed", sw.seed, "Seed for split and filler bits")->capture_default_str();
  sweep_cmd->add_option("--test-fraction", sw.test_fraction, "Held-out fraction")->capture_default_str();
  sweep_cmd->add_option("--threads", sw.threads, "Worker threads (0 = hardware)")->capture_default_str();
  sweep_cmd->get_option("--emit-stores")->excludes("--ingest");

  ReportArgs rp;
  auto* report_cmd = app.add_subcommand("report", "Summary table of capacity results");
  report_cmd->add_option("--arith", rp.arith, "BITS:WEIGHTS row (repeatable)");
  report_cmd->add_option("--sweep", rp.sweeps, "Graph CSV from sweep (repeatable)")->check(CLI::ExistingFile);
  report_cmd->add_option("--label", rp.labels, "Row labels, in --arith then --sweep order");
  report_cmd->add_option("--layers", rp.layers, "Layer descriptions, same order as --label");
  report_cmd->add_option("--threshold", rp.threshold, "Accuracy drop threshold for --sweep rows")
      ->capture_default_str();
  report_cmd->add_flag("--reference", rp.reference, "Include the ten reference model rows and all-weights totals");
  report_cmd->add_option("--out", rp.out, "Write the table to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen_cmd) return cmd_gen_corpus(gen);
    if (*train_cmd) return cmd_train(tr);
    if (*embed_cmd) return cmd_embed(em);
    if (*extract_cmd) return cmd_extract(ex);
    if (*sweep_cmd) return cmd_sweep(sw);
    if (*report_cmd) return cmd_report(rp);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
