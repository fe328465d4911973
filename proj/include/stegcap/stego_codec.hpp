#pragma once

/**
 * @file stego_codec.hpp
 * @brief Overwrites the n low-order bits of selected binary32 weights.
 *
 * Bit conventions, fixed for both embedding and extraction:
 *  - payload bytes are consumed most-significant bit first;
 *  - within one weight, the highest of the n overwritten positions (bit n-1)
 *    receives the earliest stream bit, bit 0 the latest;
 *  - weights are visited in selector order (store order, then row-major).
 *
 * Fill mode cycles the payload over every available bit (or uses the seeded
 * filler stream when the payload is empty). Message mode writes a
 * self-delimiting frame, magic 0x53544547 | u64 length | bytes, and pads the
 * rest of the capacity with the filler stream.
 */

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stegcap/error.hpp"
#include "stegcap/weight_store.hpp"

namespace stegcap {

enum class EmbedMode { Fill, Message };

struct BitPlan {
  unsigned n = 0;  // low-order bits overwritten per weight, 0..32
  EmbedMode mode = EmbedMode::Fill;
  std::uint64_t seed = 42;

  void validate() const {
    if (n > 32) throw Error(ErrorCode::InvalidPlan, "n must be in [0, 32], got " + std::to_string(n));
  }
};

inline constexpr std::uint32_t kFrameMagic = 0x53544547;  // "STEG"
inline constexpr std::uint64_t kFrameHeaderBits = 96;

/// Mask of the n low-order bits; n may be 32.
constexpr std::uint32_t low_mask(unsigned n) {
  return n >= 32 ? 0xFFFFFFFFu : ((std::uint32_t{1} << n) - 1u);
}

/// Filler bit stream: std::mt19937_64 seeded with the plan seed, each 64-bit
/// output consumed most-significant bit first.
class FillerBits {
 public:
  explicit FillerBits(std::uint64_t seed) : engine_(seed) {}

  unsigned next() {
    if (remaining_ == 0) {
      word_ = engine_();
      remaining_ = 64;
    }
    --remaining_;
    return static_cast<unsigned>((word_ >> remaining_) & 1u);
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t word_ = 0;
  unsigned remaining_ = 0;
};

/// Payload bytes MSB-first, restarting at the first byte when exhausted.
class CyclingBits {
 public:
  explicit CyclingBits(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  unsigned next() {
    const unsigned bit = (bytes_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1u;
    if (++pos_ == bytes_.size() * 8) pos_ = 0;
    return bit;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

/// Frame bits followed by filler once the frame is exhausted.
class FrameBits {
 public:
  FrameBits(std::vector<std::uint8_t> frame, std::uint64_t seed) : frame_(std::move(frame)), filler_(seed) {}

  unsigned next() {
    if (pos_ < frame_.size() * 8) {
      const unsigned bit = (frame_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1u;
      ++pos_;
      return bit;
    }
    return filler_.next();
  }

 private:
  std::vector<std::uint8_t> frame_;
  std::size_t pos_ = 0;
  FillerBits filler_;
};

inline std::uint64_t bits_available(const WeightStore& store, const Selector& sel, unsigned n) {
  if (n > 32) throw Error(ErrorCode::InvalidPlan, "n must be in [0, 32]");
  return static_cast<std::uint64_t>(n) * count_selected(store, sel);
}

/// Core overwrite loop shared by both modes. `source.next()` yields one bit.
template <class BitSource>
WeightStore overwrite_low_bits(const WeightStore& store, const Selector& sel, unsigned n, BitSource& source) {
  const auto tensors = selected_tensors(store, sel);
  WeightStore out = store;
  if (n == 0) return out;
  const std::uint32_t keep = ~low_mask(n);
  for (std::size_t t : tensors) {
    auto& tensor = out.tensor_mut(t);
    for (std::size_t e = 0; e < tensor.size(); ++e) {
      std::uint32_t chunk = 0;
      for (unsigned b = 0; b < n; ++b) chunk = (chunk << 1) | source.next();
      tensor.set_bits(e, (tensor.bits_at(e) & keep) | chunk);
    }
  }
  return out;
}

inline WeightStore embed_fill(const WeightStore& store, const Selector& sel, const BitPlan& plan,
                              std::span<const std::uint8_t> payload) {
  plan.validate();
  if (plan.mode != EmbedMode::Fill) throw Error(ErrorCode::InvalidPlan, "embed_fill requires Fill mode");
  if (payload.empty()) {
    FillerBits source(plan.seed);
    return overwrite_low_bits(store, sel, plan.n, source);
  }
  CyclingBits source(payload);
  return overwrite_low_bits(store, sel, plan.n, source);
}

inline std::vector<std::uint8_t> make_frame(std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> frame;
  frame.reserve(12 + payload.size());
  for (int i = 3; i >= 0; --i) frame.push_back(static_cast<std::uint8_t>(kFrameMagic >> (8 * i)));
  const std::uint64_t len = payload.size();
  for (int i = 7; i >= 0; --i) frame.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  frame.insert(frame.end(), payload.begin(), payload.end());
  return frame;
}

/// Bits a framed message of `payload_bytes` occupies.
constexpr std::uint64_t frame_bits(std::uint64_t payload_bytes) { return kFrameHeaderBits + 8 * payload_bytes; }

inline WeightStore embed_message(const WeightStore& store, const Selector& sel, const BitPlan& plan,
                                 std::span<const std::uint8_t> payload) {
  plan.validate();
  if (plan.mode != EmbedMode::Message) throw Error(ErrorCode::InvalidPlan, "embed_message requires Message mode");
  const std::uint64_t available = bits_available(store, sel, plan.n);
  const std::uint64_t needed = frame_bits(payload.size());
  if (needed > available) {
    throw Error(ErrorCode::CapacityExceeded,
                "needed " + std::to_string(needed) + " bits, available " + std::to_string(available));
  }
  FrameBits source(make_frame(payload), plan.seed);
  return overwrite_low_bits(store, sel, plan.n, source);
}

namespace detail {

/// Reads the embedded bit stream back in traversal order.
class StreamReader {
 public:
  StreamReader(const WeightStore& store, const Selector& sel, unsigned n)
      : store_(store), tensors_(selected_tensors(store, sel)), n_(n) {}

  /// Next bit, or -1 when the stream is exhausted.
  int next() {
    if (remaining_ == 0 && !load()) return -1;
    --remaining_;
    return static_cast<int>((chunk_ >> remaining_) & 1u);
  }

 private:
  bool load() {
    while (ti_ < tensors_.size() && ei_ >= store_[tensors_[ti_]].size()) {
      ++ti_;
      ei_ = 0;
    }
    if (ti_ >= tensors_.size()) return false;
    chunk_ = store_[tensors_[ti_]].bits_at(ei_++) & low_mask(n_);
    remaining_ = n_;
    return true;
  }

  const WeightStore& store_;
  std::vector<std::size_t> tensors_;
  unsigned n_;
  std::size_t ti_ = 0, ei_ = 0;
  std::uint32_t chunk_ = 0;
  unsigned remaining_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> extract_message(const WeightStore& store, const Selector& sel, unsigned n) {
  if (n < 1 || n > 32) throw Error(ErrorCode::InvalidPlan, "extraction needs n in [1, 32]");
  const std::uint64_t available = bits_available(store, sel, n);
  if (available < kFrameHeaderBits) {
    throw Error(ErrorCode::FrameNotFound, "only " + std::to_string(available) + " bits available, no room for a frame");
  }
  detail::StreamReader reader(store, sel, n);
  auto read_bits = [&](unsigned count) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < count; ++i) v = (v << 1) | static_cast<std::uint64_t>(reader.next());
    return v;
  };
  if (read_bits(32) != kFrameMagic) throw Error(ErrorCode::FrameNotFound, "frame magic mismatch");
  const std::uint64_t length = read_bits(64);
  if (length > (available - kFrameHeaderBits) / 8) {
    throw Error(ErrorCode::LengthOverrun, "declared length " + std::to_string(length) + " bytes exceeds " +
                                              std::to_string((available - kFrameHeaderBits) / 8) + " available");
  }
  std::vector<std::uint8_t> payload(static_cast<std::size_t>(length));
  for (auto& byte : payload) byte = static_cast<std::uint8_t>(read_bits(8));
  return payload;
}

}  // namespace stegcap
