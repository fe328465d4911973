#include <regex>
#include <sstream>

#include "test_support.hpp"

using namespace stegcap;
using namespace stegcap::testing;

namespace {

SweepResult curve(const std::vector<double>& accuracies, std::uint64_t weights = 100) {
  SweepResult r;
  r.selector = "all";
  r.weight_count = weights;
  for (std::size_t n = 0; n < accuracies.size(); ++n) {
    r.rows.push_back({static_cast<unsigned>(n), accuracies[n], static_cast<double>(n * weights) / 8.0});
  }
  return r;
}

/// Independent rendering: hundredths of the display unit, half-up, via long division on bytes.
std::string oracle_human(std::uint64_t bits) {
  const std::uint64_t unit = bits >= 8'000'000 ? 1'000'000 : 1'000;
  // value = bits / (8 * unit); hundredths = floor(bits * 100 / (8 * unit) + 1/2)
  const std::uint64_t denom = 8 * unit;
  const std::uint64_t q = bits / denom, r = bits % denom;
  std::uint64_t hundredths = q * 100 + (r * 100) / denom;
  const std::uint64_t rem = (r * 100) % denom;
  if (2 * rem >= denom) ++hundredths;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%llu.%02llu %s", static_cast<unsigned long long>(hundredths / 100),
                static_cast<unsigned long long>(hundredths % 100), unit == 1'000 ? "KB" : "MB");
  return buf;
}

WeightStore lr_shaped_store() {
  WeightStore s;
  std::vector<float> w(2560);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.01f * static_cast<float>(i % 17) - 0.08f;
  s.add(tensor("lr.weight", Role::Output, {10, 256}, w));
  s.add(tensor("lr.bias", Role::Output, {10}, std::vector<float>(10, 0.0f)));
  return s;
}

}  // namespace

TEST(CapacityFromSweep, FirstCrossingRule) {
  const auto r = capacity_from_sweep(curve({0.90, 0.90, 0.895, 0.80}), 0.01);
  EXPECT_EQ(r.n_star, 2u);
  EXPECT_EQ(r.total_bits, 200u);
}

TEST(CapacityFromSweep, LaterRecoveryDoesNotCount) {
  EXPECT_EQ(capacity_from_sweep(curve({0.9, 0.9, 0.7, 0.9, 0.9}), 0.01).n_star, 1u);
}

TEST(CapacityFromSweep, FlatCurveReachesThirtyTwo) {
  EXPECT_EQ(capacity_from_sweep(curve(std::vector<double>(33, 0.5))).n_star, 32u);
}

TEST(CapacityFromSweep, ImmediateDropGivesZero) {
  const auto r = capacity_from_sweep(curve({0.9, 0.1, 0.1}));
  EXPECT_EQ(r.n_star, 0u);
  EXPECT_EQ(r.total_bits, 0u);
}

TEST(CapacityFromSweep, LogisticRegressionNarrative) {
  std::vector<double> acc(33, 0.8652);
  for (std::size_t n = 23; n < 33; ++n) acc[n] = 0.84 - 0.02 * static_cast<double>(n - 23);
  const auto r = capacity_from_sweep(curve(acc, 2560));
  EXPECT_EQ(r.n_star, 22u);
  EXPECT_EQ(r.total_bits, 56'320u);
  EXPECT_EQ(r.human, "7.04 KB");
}

TEST(CapacityFromSweep, MonotoneInThreshold) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> acc(33);
    for (auto& a : acc) a = u(rng);
    const auto r = curve(acc);
    unsigned previous = 0;
    for (double t : {0.0, 0.001, 0.01, 0.05, 0.1, 0.3, 0.6, 1.0}) {
      const unsigned n = capacity_from_sweep(r, t).n_star;
      EXPECT_GE(n, previous);
      previous = n;
    }
  }
}

TEST(CapacityArithmetic, ReferenceTableRows) {
  const std::vector<std::pair<const char*, const char*>> expected = {
      {"LR", "7.04 KB"},          {"SVM", "90.12 KB"},  {"MLP", "81.10 KB"},         {"CNN", "3.72 MB"},
      {"LSTM", "3.36 MB"},        {"VGG16", "13.47 KB"}, {"DenseNet121", "1.75 MB"}, {"InceptionV3", "6.59 MB"},
      {"Xception", "85.44 KB"},   {"ACGAN", "295.07 KB"},
  };
  ASSERT_EQ(kReferenceModels.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& m = kReferenceModels[i];
    EXPECT_STREQ(m.label, expected[i].first);
    const auto r = capacity_arithmetic(m.bits_per_weight, m.weights);
    EXPECT_EQ(r.human, expected[i].second) << m.label;
    EXPECT_EQ(r.human, oracle_human(r.total_bits)) << m.label;
  }
}

TEST(CapacityArithmetic, Examples) {
  const auto svm = capacity_arithmetic(27, 26'703);
  EXPECT_EQ(svm.total_bits, 720'981u);
  EXPECT_EQ(svm.human, "90.12 KB");
  const auto cnn = capacity_arithmetic(20, 1'489'674);
  EXPECT_EQ(cnn.total_bits, 29'793'480u);
  EXPECT_EQ(cnn.human, "3.72 MB");
  const auto inception = combine_capacity({capacity_arithmetic(14, 21'802'784), capacity_arithmetic(25, 2'107'392)});
  EXPECT_EQ(inception.total_bits, 357'923'776u);
  EXPECT_EQ(inception.human, "44.74 MB");
  EXPECT_EQ(capacity_arithmetic(20, 14'719'818).human, "36.80 MB");
}

TEST(CapacityArithmetic, InvariantsAndRounding) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 2000; ++trial) {
    const unsigned bits = static_cast<unsigned>(rng() % 33);
    const std::uint64_t weights = rng() % 50'000'000;
    const auto r = capacity_arithmetic(bits, weights);
    EXPECT_EQ(r.total_bits, bits * weights);
    EXPECT_EQ(r.total_bytes, static_cast<double>(r.total_bits) / 8.0);
    EXPECT_EQ(r.human, oracle_human(r.total_bits));
  }
  EXPECT_EQ(human_capacity(7'999'999), "1000.00 KB");
  EXPECT_EQ(human_capacity(8'000'000), "1.00 MB");
  EXPECT_EQ(human_capacity(40), "0.01 KB");  // 5 bytes = 0.005 KB rounds half up
  EXPECT_EQ(human_capacity(0), "0.00 KB");
}

TEST(GraphCsv, RowsAndCapacityField) {
  std::vector<double> acc(33, 0.8);
  acc[0] = 0.8652;
  std::ostringstream out;
  const auto bytes = emit_graph_csv(curve(acc, 2560), out);
  const std::string text = out.str();
  EXPECT_EQ(bytes, text.size());
  EXPECT_TRUE(text.starts_with("n,accuracy,capacity_kb\n0,0.8652,0.000000\n")) << text;
  EXPECT_NE(text.find("\n22,0.8,7.040000\n"), std::string::npos);
  EXPECT_NE(text.find("\n32,0.8,10.240000\n"), std::string::npos);
  EXPECT_EQ(capacity_kb_field(1, 1), "0.000125");
}

TEST(GraphCsv, RoundTrip) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> acc(33);
  for (auto& a : acc) a = u(rng);
  const auto original = curve(acc, 34'148);
  std::ostringstream out;
  emit_graph_csv(original, out);
  std::istringstream in("# comment line\n" + out.str());
  const auto parsed = parse_graph_csv(in, "all");
  EXPECT_EQ(parsed.weight_count, original.weight_count);
  EXPECT_EQ(parsed.rows, original.rows);
  std::ostringstream again;
  emit_graph_csv(parsed, again);
  EXPECT_EQ(again.str(), out.str());
}

TEST(GraphCsv, MalformedInputIsParseError) {
  std::istringstream bad_header("n,acc\n0,1\n");
  EXPECT_TRUE(throws_code([&] { parse_graph_csv(bad_header); }, ErrorCode::ParseError));
  std::istringstream bad_value("n,accuracy,capacity_kb\n0,abc,0.000000\n");
  EXPECT_TRUE(throws_code([&] { parse_graph_csv(bad_value); }, ErrorCode::ParseError));
}

TEST(Summary, MlpAndLstmRows) {
  std::ostringstream out;
  emit_summary({{"MLP", "All", capacity_arithmetic(19, 34'148)}, {"LSTM", "All", capacity_arithmetic(24, 1'119'626)}},
               out);
  const std::string text = out.str();
  EXPECT_TRUE(std::regex_search(text, std::regex(R"(34,148\s+19\s+81\.10 KB)"))) << text;
  EXPECT_TRUE(std::regex_search(text, std::regex(R"(1,119,626\s+24\s+3\.36 MB)"))) << text;
}

TEST(Summary, EmptyListIsHeaderOnly) {
  std::ostringstream out;
  emit_summary({}, out);
  EXPECT_EQ(out.str(), "Model  Layers  Weights  Bits  Total\n");
}

TEST(Summary, GroupThousands) {
  EXPECT_EQ(group_thousands(0), "0");
  EXPECT_EQ(group_thousands(999), "999");
  EXPECT_EQ(group_thousands(1000), "1,000");
  EXPECT_EQ(group_thousands(21'802'784), "21,802,784");
}

TEST(ParseRange, Forms) {
  EXPECT_EQ(parse_range("0..32").size(), 33u);
  EXPECT_EQ(parse_range("3..5"), (std::vector<unsigned>{3, 4, 5}));
  EXPECT_EQ(parse_range("8,0,8,16"), (std::vector<unsigned>{0, 8, 16}));
  EXPECT_TRUE(throws_code([] { parse_range("0..33"); }, ErrorCode::ParseError));
  EXPECT_TRUE(throws_code([] { parse_range("5..2"); }, ErrorCode::ParseError));
}

TEST(RunSweep, SingleZeroRowEqualsBaseline) {
  const WeightStore store = lr_shaped_store();
  const StoreEvaluator eval = [&](const WeightStore& s) { return s[0].data[5] == store[0].data[5] ? 0.75 : 0.1; };
  const auto r = run_sweep_with(store, Selector::all(), eval, {}, 42, {0});
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].accuracy, 0.75);
  EXPECT_EQ(r.rows[0].cumulative_capacity_bytes, 0.0);
  EXPECT_EQ(r.weight_count, 2560u);
}

TEST(RunSweep, CumulativeCapacityAt22) {
  const auto r = run_sweep_with(lr_shaped_store(), Selector::all(), [](const WeightStore&) { return 0.5; }, {}, 42,
                                full_range(), 3);
  ASSERT_EQ(r.rows.size(), 33u);
  EXPECT_EQ(r.rows[22].n, 22u);
  EXPECT_EQ(r.rows[22].cumulative_capacity_bytes, 7040.0);
}

TEST(RunSweep, ThreadCountDoesNotChangeOutput) {
  const WeightStore store = lr_shaped_store();
  // Accuracy-like score that depends on the embedded bits.
  const StoreEvaluator eval = [](const WeightStore& s) {
    double acc = 0;
    for (std::size_t i = 0; i < 64; ++i) acc += (s[0].bits_at(i) & 0xFF) / 255.0;
    return acc / 64.0;
  };
  std::ostringstream one, many;
  emit_graph_csv(run_sweep_with(store, Selector::all(), eval, {}, 7, full_range(), 1), one);
  emit_graph_csv(run_sweep_with(store, Selector::all(), eval, {}, 7, full_range(), 4), many);
  EXPECT_EQ(one.str(), many.str());
}

TEST(RunSweep, ErrorsNameTheOffendingN) {
  const StoreEvaluator eval = [](const WeightStore& s) -> double {
    if (std::isnan(s[0].data[0]) || std::fabs(s[0].data[0]) > 1e3) throw Error(ErrorCode::NonFiniteLoss, "boom");
    return 0.5;
  };
  try {
    run_sweep_with(lr_shaped_store(), Selector::all(), eval, std::vector<std::uint8_t>{0xFF}, 1, {0, 31}, 1);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("n = 31"), std::string::npos) << e.what();
  }
}

TEST(RunSweep, RealModelZeroRowIsBaseline) {
  const Dataset data = featurize(generate_samples(CorpusSpec::reference(42, 0.03)), FeatureConfig{});
  const auto [tr, te] = split(data, 0.2, 42);
  const auto hp = Hyperparameters::defaults(ModelKind::LogisticRegression);
  const auto store = export_weights(train(tr, hp));
  const double baseline = evaluate(import_weights(ModelKind::LogisticRegression, store), te).accuracy;
  const auto r = run_sweep(store, Selector::all(), ModelKind::LogisticRegression, te, {}, 42, {0, 8, 32});
  EXPECT_EQ(r.rows[0].accuracy, baseline);
  EXPECT_EQ(r.baseline(), baseline);
  std::ostringstream a, b;
  emit_graph_csv(r, a);
  emit_graph_csv(run_sweep(store, Selector::all(), ModelKind::LogisticRegression, te, {}, 42, {0, 8, 32}), b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(ExternalBridge, ThirtyThreeStoresAndManifest) {
  TempDir dir("exchange");
  const WeightStore store = lr_shaped_store();
  const auto manifest = export_sweep_stores(store, Selector::all(), {}, 42, full_range(), dir.path());
  ASSERT_EQ(manifest.size(), 33u);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) files += e.path().extension() == ".wstg";
  EXPECT_EQ(files, 33u);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.csv"));
  EXPECT_EQ(read_file(dir / manifest[0].path), to_bytes(store));
  EXPECT_EQ(load_store((dir / manifest[22].path).string()),
            embed_fill(store, Selector::all(), BitPlan{22, EmbedMode::Fill, 42}, {}));
  const auto reread = read_exchange_manifest(dir.path());
  ASSERT_EQ(reread.size(), 33u);
  EXPECT_EQ(reread[5].n, 5u);
  EXPECT_EQ(reread[5].path, manifest[5].path);
}

TEST(ExternalBridge, IngestMatchesDirectComputation) {
  std::vector<std::pair<unsigned, double>> results;
  std::vector<double> acc(33);
  for (unsigned n = 0; n <= 32; ++n) {
    acc[n] = n < 20 ? 0.91 : 0.1;
    results.push_back({n, acc[n]});
  }
  std::ostringstream csv;
  write_results_csv(results, csv);
  std::istringstream in(csv.str());
  const auto ingested = ingest_results(in, 2560, "all");
  const auto direct = curve(acc, 2560);
  EXPECT_EQ(ingested.rows, direct.rows);
  const auto a = capacity_from_sweep(ingested);
  const auto b = capacity_from_sweep(direct);
  EXPECT_EQ(a.n_star, b.n_star);
  EXPECT_EQ(a.total_bits, b.total_bits);
  EXPECT_EQ(a.human, b.human);
}

TEST(ExternalBridge, IngestRejectsBadResults) {
  std::istringstream no_zero("n,accuracy\n1,0.5\n");
  EXPECT_TRUE(throws_code([&] { ingest_results(no_zero, 10); }, ErrorCode::InvalidSweep));
  std::istringstream dup("n,accuracy\n0,0.5\n0,0.4\n");
  EXPECT_TRUE(throws_code([&] { ingest_results(dup, 10); }, ErrorCode::ParseError));
  std::istringstream out_of_range("n,accuracy\n0,1.5\n");
  EXPECT_TRUE(throws_code([&] { ingest_results(out_of_range, 10); }, ErrorCode::ParseError));
}

TEST(CapacityText, KeyValueLines) {
  const std::string text = format_capacity_text(capacity_arithmetic(22, 2560), 0.8652, 0.01);
  EXPECT_NE(text.find("n_star=22\n"), std::string::npos);
  EXPECT_NE(text.find("total_bits=56320\n"), std::string::npos);
  EXPECT_NE(text.find("capacity=7.04 KB\n"), std::string::npos);
  EXPECT_NE(text.find("baseline_accuracy=0.8652\n"), std::string::npos);
}
