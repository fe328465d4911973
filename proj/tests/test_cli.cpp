// Runs the stegcap executable end to end on a small corpus.

#include <sys/wait.h>

#include <cstdlib>
#include <regex>
#include <sstream>

#include "test_support.hpp"

using namespace stegcap;
using namespace stegcap::testing;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  const auto bytes = read_file(p);
  return {bytes.begin(), bytes.end()};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    corpus_ = (dir_->path() / "corpus").string();
    const auto r = run("gen-corpus --out " + corpus_ + " --scale 0.03");
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static RunResult run(const std::string& args) {
    const fs::path out = dir_->path() / "stdout.txt";
    const fs::path err = dir_->path() / "stderr.txt";
    const std::string cmd = std::string(STEGCAP_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  static std::string path(const std::string& name) { return (dir_->path() / name).string(); }

  static std::string train_lr(const std::string& out) {
    const auto r = run("train --model lr --features hist --corpus " + corpus_ + " --out " + out);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    return out;
  }

  static TempDir* dir_;
  static std::string corpus_;
};

TempDir* Cli::dir_ = nullptr;
std::string Cli::corpus_;

}  // namespace

TEST_F(Cli, GenCorpusIsReproducible) {
  const std::string snapshot = path("corpus_snapshot");
  fs::copy(corpus_, snapshot, fs::copy_options::recursive);
  const auto r = run("gen-corpus --out " + corpus_ + " --scale 0.03");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("seed=42"), std::string::npos);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(snapshot)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), snapshot);
    ASSERT_EQ(read_file(e.path()), read_file(fs::path(corpus_) / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 400u);
}

TEST_F(Cli, FullScaleCorpusHasDefaultFamilies) {
  const auto r = run("gen-corpus --out " + path("full") + " --seed 42");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(std::regex_search(r.out, std::regex(R"(total\s+1535)"))) << r.out;
  EXPECT_TRUE(slurp(fs::path(path("full")) / "manifest.csv").starts_with("# "));
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("gen-corpus --out " + path("nine") + " --families 9").exit_code, 2);
  EXPECT_EQ(run("gen-corpus --out " + path("x") + " --no-such-flag").exit_code, 2);
  EXPECT_EQ(run("").exit_code, 2);
  EXPECT_EQ(run("frobnicate").exit_code, 2);
  EXPECT_EQ(run("train --model lr --corpus " + path("missing_dir") + " --out " + path("m.wstg")).exit_code, 2);
  EXPECT_EQ(run("train --model tree --corpus " + corpus_ + " --out " + path("m.wstg")).exit_code, 2);
}

TEST_F(Cli, HelpListsEveryFlag) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> expected = {
      {"gen-corpus", {"--out", "--seed", "--families", "--scale", "--concentration", "--min-bytes", "--max-bytes"}},
      {"train", {"--model", "--features", "--corpus", "--out", "--seed", "--test-fraction", "--grid", "--epochs"}},
      {"embed", {"--store", "--out", "--select", "--bits", "--mode", "--payload", "--seed"}},
      {"extract", {"--store", "--out", "--select", "--bits"}},
      {"sweep", {"--store", "--model", "--corpus", "--select", "--threshold", "--range", "--emit-stores", "--ingest"}},
      {"report", {"--arith", "--sweep", "--label", "--layers", "--reference"}},
  };
  for (const auto& [cmd, flags] : expected) {
    const auto r = run(cmd + " --help");
    EXPECT_EQ(r.exit_code, 0) << cmd;
    for (const auto& f : flags) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
}

TEST_F(Cli, TrainWritesStoreAndConfusion) {
  const std::string store = train_lr(path("lr.wstg"));
  const WeightStore s = load_store(store);
  const auto& w = s[s.find("lr.weight")];
  EXPECT_EQ(w.dims, (std::vector<std::uint32_t>{10, 256}));
  EXPECT_EQ(w.role, Role::Output);
  const std::string confusion = slurp(path("lr.confusion.csv"));
  EXPECT_TRUE(confusion.starts_with("# stegcap train")) << confusion;
  EXPECT_NE(confusion.find("# seed=42"), std::string::npos);
  EXPECT_NE(confusion.find("Adload"), std::string::npos);
}

TEST_F(Cli, GridMarksTheWinner) {
  const auto r = run("train --model svm --corpus " + corpus_ + " --out " + path("svm.wstg") + " --grid");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int marked = 0, rows = 0;
  while (std::getline(lines, line)) {
    if (line.find("svm lr=") == std::string::npos || line.starts_with("hyperparameters")) continue;
    ++rows;
    marked += line.find('*') != std::string::npos;
  }
  EXPECT_EQ(rows, 3);
  EXPECT_EQ(marked, 1);
}

TEST_F(Cli, EmbedExtractRoundTrip) {
  const std::string store = train_lr(path("lr_msg.wstg"));
  const std::string payload = path("payload.bin");
  {
    std::ofstream p(payload, std::ios::binary);
    p << "a secret hidden in the mantissas";
  }
  auto r = run("embed --store " + store + " --out " + path("stego.wstg") + " --bits 8 --mode message --payload " +
               payload);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  r = run("extract --store " + path("stego.wstg") + " --bits 8 --out " + path("recovered.bin"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(read_file(path("recovered.bin")), read_file(payload));
}

TEST_F(Cli, ZeroBitEmbedIsIdentity) {
  const std::string store = train_lr(path("lr_zero.wstg"));
  const auto r = run("embed --store " + store + " --out " + path("zero.wstg") + " --bits 0");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(read_file(path("zero.wstg")), read_file(store));
}

TEST_F(Cli, OversizedPayloadExitsThree) {
  const std::string store = train_lr(path("lr_big.wstg"));
  const std::string payload = path("big.bin");
  {
    std::ofstream p(payload, std::ios::binary);
    p << std::string(1000, 'x');
  }
  const auto r = run("embed --store " + store + " --out " + path("never.wstg") +
                     " --bits 2 --mode message --payload " + payload);
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.err.find("needed 8096"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("available 5120"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("never.wstg")));
}

TEST_F(Cli, SweepWritesCsvAndCapacityText) {
  const std::string store = train_lr(path("lr.wstg"));
  const auto r = run("sweep --store " + store + " --corpus " + corpus_ + " --select all --threshold 0.01");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string csv = slurp(path("lr_sweep.csv"));
  EXPECT_TRUE(csv.starts_with("# stegcap sweep")) << csv;
  EXPECT_NE(csv.find("n,accuracy,capacity_kb\n0,"), std::string::npos);
  EXPECT_NE(csv.find(",7.040000\n"), std::string::npos);
  const std::string text = slurp(path("lr_capacity.txt"));
  EXPECT_NE(text.find("n_star="), std::string::npos);
  EXPECT_NE(text.find("weight_count=2560"), std::string::npos);
}

TEST_F(Cli, SweepIsByteReproducible) {
  const std::string store = train_lr(path("lr_det.wstg"));
  const std::string args = "sweep --store " + store + " --corpus " + corpus_ + " --range 0,8,16,24,32 --out " +
                           path("det.csv") + " --capacity-out " + path("det.txt");
  ASSERT_EQ(run(args).exit_code, 0);
  const auto csv = read_file(path("det.csv"));
  const auto txt = read_file(path("det.txt"));
  ASSERT_EQ(run(args).exit_code, 0);
  EXPECT_EQ(read_file(path("det.csv")), csv);
  EXPECT_EQ(read_file(path("det.txt")), txt);
}

TEST_F(Cli, OutputAndHiddenSelectorsGiveSeparateCurves) {
  auto r = run("train --model mlp --corpus " + corpus_ + " --out " + path("mlp.wstg") + " --epochs 5");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  for (const std::string sel : {"output", "hidden"}) {
    r = run("sweep --store " + path("mlp.wstg") + " --corpus " + corpus_ + " --select " + sel +
            " --range 0,16,32 --out " + path("mlp_" + sel + ".csv") + " --capacity-out " + path(sel + ".txt"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
  EXPECT_NE(slurp(path("mlp_output.csv")).find("weight_count=100"), std::string::npos);
  EXPECT_NE(slurp(path("mlp_hidden.csv")).find("weight_count=34048"), std::string::npos);
}

TEST_F(Cli, ExternalEvaluatorPath) {
  const std::string store = train_lr(path("lr_ext.wstg"));
  const std::string ex = path("exchange");
  auto r = run("sweep --store " + store + " --emit-stores " + ex);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(read_exchange_manifest(ex).size(), 33u);
  {
    std::ofstream res(fs::path(ex) / "results.csv");
    res << "n,accuracy\n";
    for (int n = 0; n <= 32; ++n) res << n << ',' << (n <= 22 ? 0.86 : 0.1) << '\n';
  }
  r = run("sweep --store " + store + " --ingest " + ex + " --out " + path("ext.csv") + " --capacity-out " +
          path("ext.txt"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string text = slurp(path("ext.txt"));
  EXPECT_NE(text.find("n_star=22"), std::string::npos) << text;
  EXPECT_NE(text.find("capacity=7.04 KB"), std::string::npos) << text;
}

TEST_F(Cli, ReportArithmeticAndSweepRows) {
  auto r = run("report --arith 27:26703 --label SVM");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("90.12 KB"), std::string::npos) << r.out;
  r = run("report --reference");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(std::regex_search(r.out, std::regex(R"(34,148\s+19\s+81\.10 KB)"))) << r.out;
  EXPECT_NE(r.out.find("44.74 MB"), std::string::npos);
  EXPECT_NE(r.out.find("36.80 MB"), std::string::npos);
  EXPECT_EQ(run("report --arith 27-26703").exit_code, 2);

  const std::string store = train_lr(path("lr_rep.wstg"));
  ASSERT_EQ(run("sweep --store " + store + " --corpus " + corpus_ + " --out " + path("rep.csv") +
                " --capacity-out " + path("rep.txt"))
                .exit_code,
            0);
  r = run("report --sweep " + path("rep.csv") + " --label LR --out " + path("summary.txt"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(std::regex_search(slurp(path("summary.txt")), std::regex(R"(LR\s+All\s+2,560\s+\d+\s+[\d.]+ KB)")));
}
