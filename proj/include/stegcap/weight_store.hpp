#pragma once

/**
 * @file weight_store.hpp
 * @brief In-memory weight store, the WSTG v1 on-disk format, and selectors.
 *
 * WSTG v1 layout (integers little-endian):
 *
 *     "WSTG" | version u8 = 1 | tensor_count u32
 *     per tensor: name_len u16 | name | role u8 | rank u8 | dims u32 x rank
 *                 | data f32 x product(dims)
 *
 * Tensor order is significant: it is the traversal order used when bits are
 * embedded into the store.
 */

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stegcap/error.hpp"

namespace stegcap {

static_assert(std::numeric_limits<float>::is_iec559, "binary32 floats required");

enum class Role : std::uint8_t { Output = 0, Hidden = 1, Pretrained = 2 };

constexpr std::string_view to_string(Role role) {
  switch (role) {
    case Role::Output: return "output";
    case Role::Hidden: return "hidden";
    case Role::Pretrained: return "pretrained";
  }
  return "?";
}

inline constexpr std::size_t kMaxRank = 8;
inline constexpr std::uint64_t kMaxElements = 0xFFFFFFFFULL;  // product must stay below 2^32

/// Product of dims, or throws DimOverflow when rank or element count exceed the limits.
inline std::uint64_t element_count(const std::vector<std::uint32_t>& dims) {
  if (dims.size() > kMaxRank) {
    throw Error(ErrorCode::DimOverflow, "rank " + std::to_string(dims.size()) + " exceeds 8");
  }
  std::uint64_t product = 1;
  for (std::uint32_t d : dims) {
    if (d == 0) throw Error(ErrorCode::BadTensor, "zero-sized dimension");
    product *= d;
    if (product >= kMaxElements + 1) {
      throw Error(ErrorCode::DimOverflow, "element count reaches 2^32");
    }
  }
  return product;
}

/// Tensors whose name ends in "bias" are parameters but never cover media
/// for role-based selectors; weight counts exclude them.
inline bool is_bias_name(std::string_view name) {
  constexpr std::string_view suffix = "bias";
  if (name.size() < suffix.size() || name.substr(name.size() - suffix.size()) != suffix) return false;
  if (name.size() == suffix.size()) return true;
  const char sep = name[name.size() - suffix.size() - 1];
  return sep == '.' || sep == '_' || sep == '/';
}

struct TensorRecord {
  std::string name;
  Role role = Role::Hidden;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t size() const { return data.size(); }

  std::uint32_t bits_at(std::size_t i) const { return std::bit_cast<std::uint32_t>(data[i]); }
  void set_bits(std::size_t i, std::uint32_t bits) { data[i] = std::bit_cast<float>(bits); }

  /// Bitwise equality, so NaN payloads compare equal to themselves.
  friend bool operator==(const TensorRecord& a, const TensorRecord& b) {
    return a.name == b.name && a.role == b.role && a.dims == b.dims && a.data.size() == b.data.size() &&
           (a.data.empty() || std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0);
  }
};

class WeightStore {
 public:
  WeightStore() = default;

  /// Appends a tensor after checking its invariants.
  void add(TensorRecord tensor) {
    if (tensor.name.empty()) throw Error(ErrorCode::BadTensor, "tensor name is empty");
    if (tensor.name.size() > 0xFFFF) throw Error(ErrorCode::BadTensor, "tensor name longer than 65535 bytes");
    if (find(tensor.name) != npos) {
      throw Error(ErrorCode::DuplicateTensorName, "duplicate tensor name '" + tensor.name + "'");
    }
    if (static_cast<std::uint8_t>(tensor.role) > 2) throw Error(ErrorCode::BadTensor, "invalid role");
    if (element_count(tensor.dims) != tensor.data.size()) {
      throw Error(ErrorCode::BadTensor, "tensor '" + tensor.name + "' data length does not match dims");
    }
    tensors_.push_back(std::move(tensor));
  }

  const std::vector<TensorRecord>& tensors() const { return tensors_; }
  std::size_t tensor_count() const { return tensors_.size(); }
  const TensorRecord& operator[](std::size_t i) const { return tensors_[i]; }

  /// Mutable access for producing modified copies; callers must not change shapes.
  TensorRecord& tensor_mut(std::size_t i) { return tensors_[i]; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t find(std::string_view name) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      if (tensors_[i].name == name) return i;
    }
    return npos;
  }

  std::uint64_t total_weight_count() const {
    std::uint64_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  friend bool operator==(const WeightStore&, const WeightStore&) = default;

 private:
  std::vector<TensorRecord> tensors_;
};

// ---------------------------------------------------------------------------
// Selectors

struct Selector {
  enum class Kind { All, Output, Hidden, Pretrained, Named };

  Kind kind = Kind::All;
  std::vector<std::string> names;

  static Selector all() { return {Kind::All, {}}; }
  static Selector output() { return {Kind::Output, {}}; }
  static Selector hidden() { return {Kind::Hidden, {}}; }
  static Selector pretrained() { return {Kind::Pretrained, {}}; }
  static Selector named(std::vector<std::string> names) { return {Kind::Named, std::move(names)}; }

  /// Parses "all", "output", "hidden", "pretrained" or "name:a,b,c".
  static Selector parse(std::string_view text) {
    if (text == "all") return all();
    if (text == "output") return output();
    if (text == "hidden") return hidden();
    if (text == "pretrained") return pretrained();
    constexpr std::string_view prefix = "name:";
    if (text.starts_with(prefix)) {
      std::vector<std::string> names;
      std::string_view rest = text.substr(prefix.size());
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        names.emplace_back(rest.substr(0, comma));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      if (names.empty()) throw Error(ErrorCode::ParseError, "empty name list in selector");
      return named(std::move(names));
    }
    throw Error(ErrorCode::ParseError, "unknown selector '" + std::string(text) + "'");
  }

  std::string describe() const {
    switch (kind) {
      case Kind::All: return "all";
      case Kind::Output: return "output";
      case Kind::Hidden: return "hidden";
      case Kind::Pretrained: return "pretrained";
      case Kind::Named: {
        std::string s = "name:";
        for (std::size_t i = 0; i < names.size(); ++i) s += (i ? "," : "") + names[i];
        return s;
      }
    }
    return "?";
  }
};

struct WeightSlot {
  std::size_t tensor;
  std::size_t element;
  friend bool operator==(const WeightSlot&, const WeightSlot&) = default;
};

/// Indices of the tensors a selector covers, in store order.
inline std::vector<std::size_t> selected_tensors(const WeightStore& store, const Selector& sel) {
  std::vector<std::size_t> out;
  if (sel.kind == Selector::Kind::Named) {
    std::vector<bool> wanted(store.tensor_count(), false);
    for (const auto& name : sel.names) {
      const std::size_t idx = store.find(name);
      if (idx == WeightStore::npos) throw Error(ErrorCode::UnknownTensorName, "no tensor named '" + name + "'");
      wanted[idx] = true;
    }
    for (std::size_t i = 0; i < wanted.size(); ++i) {
      if (wanted[i]) out.push_back(i);
    }
    return out;
  }
  for (std::size_t i = 0; i < store.tensor_count(); ++i) {
    const auto& t = store[i];
    if (is_bias_name(t.name)) continue;
    const bool take = sel.kind == Selector::Kind::All ||
                      (sel.kind == Selector::Kind::Output && t.role == Role::Output) ||
                      (sel.kind == Selector::Kind::Hidden && t.role == Role::Hidden) ||
                      (sel.kind == Selector::Kind::Pretrained && t.role == Role::Pretrained);
    if (take) out.push_back(i);
  }
  return out;
}

/// Slots ordered by tensor position, then row-major element index.
inline std::vector<WeightSlot> select(const WeightStore& store, const Selector& sel) {
  std::vector<WeightSlot> slots;
  for (std::size_t t : selected_tensors(store, sel)) {
    for (std::size_t e = 0; e < store[t].size(); ++e) slots.push_back({t, e});
  }
  return slots;
}

inline std::uint64_t count_selected(const WeightStore& store, const Selector& sel) {
  std::uint64_t n = 0;
  for (std::size_t t : selected_tensors(store, sel)) n += store[t].size();
  return n;
}

// ---------------------------------------------------------------------------
// WSTG v1 serialization

inline constexpr std::array<char, 4> kWstgMagic = {'W', 'S', 'T', 'G'};
inline constexpr std::uint8_t kWstgVersion = 1;

namespace detail {

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw Error(ErrorCode::Io, "write to sink failed");
    count_ += n;
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) {
    const std::uint8_t b[2] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
    bytes(b, 2);
  }
  void u32(std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    bytes(b, 4);
  }
  std::size_t count() const { return count_; }

 private:
  std::ostream& out_;
  std::size_t count_ = 0;
};

class LeReader {
 public:
  explicit LeReader(std::istream& in) : in_(in) {}

  void bytes(void* p, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw Error(ErrorCode::TruncatedFile, std::string("unexpected end of input while reading ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    std::uint8_t v;
    bytes(&v, 1, what);
    return v;
  }
  std::uint16_t u16(const char* what) {
    std::uint8_t b[2];
    bytes(b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    std::uint8_t b[4];
    bytes(b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

 private:
  std::istream& in_;
};

}  // namespace detail

/// Serializes `store`; returns the number of bytes written.
inline std::size_t write_store(const WeightStore& store, std::ostream& sink) {
  detail::LeWriter w(sink);
  w.bytes(kWstgMagic.data(), kWstgMagic.size());
  w.u8(kWstgVersion);
  w.u32(static_cast<std::uint32_t>(store.tensor_count()));
  std::vector<std::uint8_t> buf;
  for (const auto& t : store.tensors()) {
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.u8(static_cast<std::uint8_t>(t.role));
    w.u8(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.u32(d);
    buf.resize(t.data.size() * 4);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const std::uint32_t bits = t.bits_at(i);
      for (int k = 0; k < 4; ++k) buf[4 * i + k] = static_cast<std::uint8_t>(bits >> (8 * k));
    }
    w.bytes(buf.data(), buf.size());
  }
  return w.count();
}

inline WeightStore read_store(std::istream& source) {
  detail::LeReader r(source);
  std::array<char, 4> magic{};
  r.bytes(magic.data(), magic.size(), "magic");
  if (magic != kWstgMagic) throw Error(ErrorCode::BadMagic, "not a WSTG file");
  const std::uint8_t version = r.u8("version");
  if (version != kWstgVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "WSTG version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32("tensor count");
  WeightStore store;
  std::vector<std::uint8_t> buf;
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord t;
    t.name.resize(r.u16("name length"));
    r.bytes(t.name.data(), t.name.size(), "tensor name");
    const std::uint8_t role = r.u8("role");
    if (role > 2) throw Error(ErrorCode::BadTensor, "invalid role byte " + std::to_string(role));
    t.role = static_cast<Role>(role);
    const std::uint8_t rank = r.u8("rank");
    if (rank > kMaxRank) throw Error(ErrorCode::DimOverflow, "rank " + std::to_string(rank) + " exceeds 8");
    t.dims.resize(rank);
    for (auto& d : t.dims) d = r.u32("dims");
    const std::uint64_t n = element_count(t.dims);
    // Read in bounded chunks so a corrupt header cannot force a huge allocation up front.
    constexpr std::size_t kChunk = 1 << 20;
    t.data.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, kChunk)));
    for (std::uint64_t done = 0; done < n;) {
      const std::size_t take = static_cast<std::size_t>(std::min<std::uint64_t>(n - done, kChunk));
      buf.resize(take * 4);
      r.bytes(buf.data(), buf.size(), "tensor data");
      for (std::size_t k = 0; k < take; ++k) {
        const std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * k]) |
                                   (static_cast<std::uint32_t>(buf[4 * k + 1]) << 8) |
                                   (static_cast<std::uint32_t>(buf[4 * k + 2]) << 16) |
                                   (static_cast<std::uint32_t>(buf[4 * k + 3]) << 24);
        t.data.push_back(std::bit_cast<float>(bits));
      }
      done += take;
    }
    if (t.name.empty()) throw Error(ErrorCode::BadTensor, "tensor " + std::to_string(i) + " has an empty name");
    store.add(std::move(t));
  }
  return store;
}

inline std::vector<std::uint8_t> to_bytes(const WeightStore& store) {
  std::ostringstream out(std::ios::binary);
  write_store(store, out);
  const std::string s = std::move(out).str();
  return {s.begin(), s.end()};
}

inline WeightStore from_bytes(std::span<const std::uint8_t> bytes) {
  std::istringstream in(std::string(bytes.begin(), bytes.end()), std::ios::binary);
  return read_store(in);
}

inline void save_store(const WeightStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_store(store, out);
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path + "'");
}

inline WeightStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return read_store(in);
}

}  // namespace stegcap
