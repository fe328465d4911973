#pragma once

/**
 * @file corpus.hpp
 * @brief Synthetic 10-family binary corpus, byte featurizers, and splits.
 *
 * Each family owns a 256-category byte distribution drawn once from a
 * symmetric Dirichlet. A family may be declared the sibling of an earlier
 * one, in which case its distribution is a mixture of the sibling's and its
 * own draw; this produces a deliberately confusable pair. Sample bytes are
 * i.i.d. draws from the family distribution.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stegcap/error.hpp"
#include "stegcap/random.hpp"

namespace stegcap {

inline constexpr int kNumClasses = 10;

struct FamilySpec {
  std::string name;
  std::size_t sample_count = 1;
  double concentration = 1.0;
  std::optional<std::size_t> sibling_of;  // index of an earlier family
  double sibling_mix = 0.0;               // weight of this family's own draw when sibling_of is set
};

struct FamilyCount {
  const char* name;
  std::size_t samples;
};

/// Family names and sample counts of the imbalanced 10-family malware set the
/// synthetic corpus imitates.
inline constexpr std::array<FamilyCount, kNumClasses> kReferenceFamilies = {{
    {"Adload", 1225},
    {"BHO", 1412},
    {"Ceeinject", 1084},
    {"OnLineGames", 1511},
    {"Renos", 1567},
    {"Startpage", 1347},
    {"VB", 1110},
    {"VBinject", 2689},
    {"Vobfus", 1108},
    {"Winwebsec", 2303},
}};

/// Scales the reference counts by `scale`, apportioning floor(total * scale)
/// samples by largest remainder so the total is exact. Every family keeps at least one sample.
inline std::array<std::size_t, kNumClasses> scaled_family_counts(double scale) {
  if (!(scale > 0.0)) throw Error(ErrorCode::InvalidCorpusSpec, "scale must be positive");
  std::size_t total = 0;
  for (const auto& f : kReferenceFamilies) total += f.samples;
  const auto target = static_cast<std::size_t>(std::floor(static_cast<double>(total) * scale + 1e-9));
  std::array<std::size_t, kNumClasses> counts{};
  std::array<std::pair<double, std::size_t>, kNumClasses> remainders{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    const double exact = static_cast<double>(kReferenceFamilies[i].samples) * scale;
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders[i] = {exact - static_cast<double>(counts[i]), i};
    assigned += counts[i];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < target && k < kNumClasses; ++k, ++assigned) ++counts[remainders[k].second];
  for (auto& c : counts) c = std::max<std::size_t>(c, 1);
  return counts;
}

struct CorpusSpec {
  std::vector<FamilySpec> families;
  std::size_t min_bytes = 4096;
  std::size_t max_bytes = 8192;
  std::uint64_t seed = 42;

  // Calibrated on seed 42 with default hyperparameters: MLP ~0.89, LR ~0.98
  // held-out accuracy on byte histograms, errors concentrated on VB / VBinject.
  static constexpr double kDefaultConcentration = 250.0;
  static constexpr double kDefaultSiblingMix = 0.5;

  static CorpusSpec reference(std::uint64_t seed = 42, double scale = 0.1,
                              double concentration = kDefaultConcentration) {
    CorpusSpec spec;
    spec.seed = seed;
    const auto counts = scaled_family_counts(scale);
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      spec.families.push_back({kReferenceFamilies[i].name, counts[i], concentration, std::nullopt, 0.0});
    }
    spec.families[7].sibling_of = 6;  // VBinject shares a base with VB
    spec.families[7].sibling_mix = kDefaultSiblingMix;
    return spec;
  }

  std::size_t total_samples() const {
    std::size_t n = 0;
    for (const auto& f : families) n += f.sample_count;
    return n;
  }

  void validate() const {
    if (families.size() != kNumClasses) {
      throw Error(ErrorCode::InvalidCorpusSpec,
                  "exactly 10 families required, got " + std::to_string(families.size()));
    }
    if (min_bytes < 4096) throw Error(ErrorCode::InvalidCorpusSpec, "min_bytes must be at least 4096");
    if (max_bytes < min_bytes) throw Error(ErrorCode::InvalidCorpusSpec, "max_bytes below min_bytes");
    for (std::size_t i = 0; i < families.size(); ++i) {
      const auto& f = families[i];
      if (f.name.empty() || f.name.find_first_of("/\\,\n") != std::string::npos) {
        throw Error(ErrorCode::InvalidCorpusSpec, "invalid family name '" + f.name + "'");
      }
      if (f.sample_count < 1) throw Error(ErrorCode::InvalidCorpusSpec, f.name + ": sample_count must be >= 1");
      if (!(f.concentration > 0.0)) throw Error(ErrorCode::InvalidCorpusSpec, f.name + ": concentration must be > 0");
      if (f.sibling_of && (*f.sibling_of >= i || !(f.sibling_mix >= 0.0 && f.sibling_mix <= 1.0))) {
        throw Error(ErrorCode::InvalidCorpusSpec, f.name + ": sibling must be an earlier family, mix in [0,1]");
      }
    }
  }
};

/// Byte distributions of every family, in family order.
inline std::vector<std::vector<double>> family_distributions(const CorpusSpec& spec) {
  spec.validate();
  std::vector<std::vector<double>> dists;
  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    Rng rng(mix_seed(spec.seed, f));
    auto own = rng.dirichlet(256, spec.families[f].concentration);
    if (const auto& fam = spec.families[f]; fam.sibling_of) {
      const auto& base = dists[*fam.sibling_of];
      for (std::size_t b = 0; b < 256; ++b) own[b] = (1.0 - fam.sibling_mix) * base[b] + fam.sibling_mix * own[b];
    }
    dists.push_back(std::move(own));
  }
  return dists;
}

struct Sample {
  int label = 0;
  std::vector<std::uint8_t> bytes;
};

/// Bytes of sample `index` of family `family`. Every sample has its own
/// sub-seed, so generation order never changes the output.
inline std::vector<std::uint8_t> generate_sample(const CorpusSpec& spec, const AliasTable& table, std::size_t family,
                                                 std::size_t index) {
  Rng rng(mix_seed(mix_seed(spec.seed, 1000 + family), index));
  const std::size_t size = spec.min_bytes + rng.below(spec.max_bytes - spec.min_bytes + 1);
  std::vector<std::uint8_t> bytes(size);
  for (auto& b : bytes) b = static_cast<std::uint8_t>(table.sample(rng));
  return bytes;
}

/// The whole corpus in memory, family by family.
inline std::vector<Sample> generate_samples(const CorpusSpec& spec) {
  const auto dists = family_distributions(spec);
  std::vector<Sample> out;
  out.reserve(spec.total_samples());
  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    const AliasTable table(dists[f]);
    for (std::size_t i = 0; i < spec.families[f].sample_count; ++i) {
      out.push_back({static_cast<int>(f), generate_sample(spec, table, f, i)});
    }
  }
  return out;
}

struct ManifestEntry {
  std::string path;  // relative to the corpus directory
  std::string family;
  std::size_t bytes = 0;
};

/// Writes `<dir>/<family>/<index>.bin` plus `<dir>/manifest.csv`
/// (`path,family,bytes`). `comment` lines are emitted first, prefixed with '#'.
inline std::vector<ManifestEntry> gen_corpus(const CorpusSpec& spec, const std::filesystem::path& dir,
                                             const std::vector<std::string>& comment = {}) {
  namespace fs = std::filesystem;
  const auto dists = family_distributions(spec);
  std::vector<ManifestEntry> manifest;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());
  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    const auto& fam = spec.families[f];
    const AliasTable table(dists[f]);
    fs::create_directories(dir / fam.name, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create family directory: " + ec.message());
    for (std::size_t i = 0; i < fam.sample_count; ++i) {
      const auto bytes = generate_sample(spec, table, f, i);
      const std::string rel = fam.name + "/" + std::to_string(i) + ".bin";
      std::ofstream out(dir / rel, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw Error(ErrorCode::Io, "failed writing '" + (dir / rel).string() + "'");
      manifest.push_back({rel, fam.name, bytes.size()});
    }
  }
  std::ofstream m(dir / "manifest.csv", std::ios::binary | std::ios::trunc);
  for (const auto& line : comment) m << "# " << line << '\n';
  m << "path,family,bytes\n";
  for (const auto& e : manifest) m << e.path << ',' << e.family << ',' << e.bytes << '\n';
  if (!m) throw Error(ErrorCode::Io, "failed writing manifest");
  return manifest;
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.csv");
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + (dir / "manifest.csv").string() + "'");
  std::vector<ManifestEntry> entries;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "path,family,bytes") throw Error(ErrorCode::ParseError, "unexpected manifest header");
      header_seen = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw Error(ErrorCode::ParseError, "malformed manifest line '" + line + "'");
    }
    entries.push_back({line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1), std::stoull(line.substr(c2 + 1))});
  }
  return entries;
}

/// Loads a generated corpus. Class indices follow the order in which
/// families first appear in the manifest.
inline std::pair<std::vector<Sample>, std::vector<std::string>> load_corpus(const std::filesystem::path& dir) {
  const auto manifest = read_manifest(dir);
  std::vector<std::string> names;
  std::vector<Sample> samples;
  samples.reserve(manifest.size());
  for (const auto& e : manifest) {
    auto it = std::find(names.begin(), names.end(), e.family);
    if (it == names.end()) {
      names.push_back(e.family);
      it = names.end() - 1;
    }
    std::ifstream in(dir / e.path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open corpus file '" + e.path + "'");
    Sample s;
    s.label = static_cast<int>(it - names.begin());
    s.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    samples.push_back(std::move(s));
  }
  if (names.size() != kNumClasses) {
    throw Error(ErrorCode::InvalidCorpusSpec, "corpus has " + std::to_string(names.size()) + " families, expected 10");
  }
  return {std::move(samples), std::move(names)};
}

// ---------------------------------------------------------------------------
// Featurizers

/// Relative byte histogram: entry i is the fraction of bytes equal to i.
inline Eigen::VectorXd byte_histogram(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error(ErrorCode::EmptyInput, "cannot histogram an empty byte sequence");
  std::array<std::uint64_t, 256> counts{};
  for (auto b : bytes) ++counts[b];
  Eigen::VectorXd h(256);
  const double len = static_cast<double>(bytes.size());
  for (int i = 0; i < 256; ++i) h[i] = static_cast<double>(counts[i]) / len;
  return h;
}

/// First w*h bytes laid out row-major as an h-row, w-column image scaled to
/// [0,1]; short inputs are zero-padded.
inline Eigen::MatrixXd byte_image(std::span<const std::uint8_t> bytes, std::size_t w, std::size_t h) {
  if (w == 0 || h == 0) throw Error(ErrorCode::InvalidCorpusSpec, "image dimensions must be positive");
  Eigen::MatrixXd img = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w));
  const std::size_t n = std::min(bytes.size(), w * h);
  for (std::size_t i = 0; i < n; ++i) {
    img(static_cast<Eigen::Index>(i / w), static_cast<Eigen::Index>(i % w)) = bytes[i] / 255.0;
  }
  return img;
}

/// First n bytes scaled to [0,1], zero-padded.
inline Eigen::VectorXd byte_sequence(std::span<const std::uint8_t> bytes, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidCorpusSpec, "sequence length must be positive");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  const std::size_t m = std::min(bytes.size(), n);
  for (std::size_t i = 0; i < m; ++i) v[static_cast<Eigen::Index>(i)] = bytes[i] / 255.0;
  return v;
}

enum class Featurizer { Histogram, Image, Sequence };

struct FeatureConfig {
  Featurizer kind = Featurizer::Histogram;
  std::size_t image_width = 64;
  std::size_t image_height = 64;
  std::size_t sequence_length = 300;

  std::size_t dim() const {
    switch (kind) {
      case Featurizer::Histogram: return 256;
      case Featurizer::Image: return image_width * image_height;
      case Featurizer::Sequence: return sequence_length;
    }
    return 0;
  }

  static FeatureConfig parse(const std::string& name) {
    if (name == "hist") return {Featurizer::Histogram};
    if (name == "image") return {Featurizer::Image};
    if (name == "seq") return {Featurizer::Sequence};
    throw Error(ErrorCode::ParseError, "unknown featurizer '" + name + "' (hist, image, seq)");
  }
};

struct Dataset {
  Eigen::MatrixXd features;  // rows = samples
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t size() const { return labels.size(); }

  Dataset subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
      out.labels.push_back(labels[rows[i]]);
    }
    out.class_names = class_names;
    return out;
  }

  void validate() const {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
      throw Error(ErrorCode::DimMismatch, "feature rows do not match label count");
    }
    for (int y : labels) {
      if (y < 0 || y >= kNumClasses) throw Error(ErrorCode::DimMismatch, "label out of range: " + std::to_string(y));
    }
  }
};

inline Dataset featurize(const std::vector<Sample>& samples, const FeatureConfig& cfg,
                         std::vector<std::string> class_names = {}) {
  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(cfg.dim()));
  ds.labels.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    switch (cfg.kind) {
      case Featurizer::Histogram: ds.features.row(row) = byte_histogram(samples[i].bytes).transpose(); break;
      case Featurizer::Image: {
        const auto img = byte_image(samples[i].bytes, cfg.image_width, cfg.image_height);
        for (Eigen::Index r = 0; r < img.rows(); ++r) {
          ds.features.block(row, r * img.cols(), 1, img.cols()) = img.row(r);
        }
        break;
      }
      case Featurizer::Sequence:
        ds.features.row(row) = byte_sequence(samples[i].bytes, cfg.sequence_length).transpose();
        break;
    }
    ds.labels.push_back(samples[i].label);
  }
  ds.class_names = std::move(class_names);
  return ds;
}

/// Deterministic train/test split. Stratified splits take round(c * fraction)
/// of each class c (at least one sample on each side).
inline std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed,
                                         bool stratified = true) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidCorpusSpec, "test_fraction must be in (0, 1)");
  }
  data.validate();
  Rng rng(mix_seed(seed, 0x5eed));
  std::vector<std::size_t> train, test;
  auto take = [&](std::vector<std::size_t> idx) {
    const auto c = idx.size();
    auto k = static_cast<std::size_t>(std::llround(static_cast<double>(c) * test_fraction));
    k = std::clamp<std::size_t>(k, 1, c - 1);
    rng.shuffle(idx);
    test.insert(test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  };
  if (stratified) {
    for (int cls = 0; cls < kNumClasses; ++cls) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.labels[i] == cls) idx.push_back(i);
      }
      if (idx.empty()) continue;
      if (idx.size() < 2) {
        throw Error(ErrorCode::ClassTooSmall, "class " + std::to_string(cls) + " has fewer than 2 samples");
      }
      take(std::move(idx));
    }
  } else {
    if (data.size() < 2) throw Error(ErrorCode::ClassTooSmall, "need at least 2 samples to split");
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    take(std::move(idx));
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {data.subset(train), data.subset(test)};
}

}  // namespace stegcap
