#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/crc.hpp>

#include "lshbloom/error.hpp"

namespace lshbloom::bytes {

using Crc32c = boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true>;

inline std::uint32_t crc32c(std::span<const std::uint8_t> data) {
  Crc32c crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

template <typename T>
T to_little_endian(T v) {
  static_assert(std::is_integral_v<T>);
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    T out{};
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out = static_cast<T>((out << 8) | ((v >> (8 * i)) & 0xff));
    }
    return out;
  }
  return v;
}

/// Appends little-endian scalars to a byte buffer.
class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T v) {
    if constexpr (std::is_floating_point_v<T>) {
      static_assert(sizeof(T) == 8);
      put(std::bit_cast<std::uint64_t>(v));
    } else {
      T le = to_little_endian(v);
      const auto* p = reinterpret_cast<const std::uint8_t*>(&le);
      out_.insert(out_.end(), p, p + sizeof(T));
    }
  }

  void put_bytes(std::span<const std::uint8_t> data) {
    out_.insert(out_.end(), data.begin(), data.end());
  }

  std::size_t size() const { return out_.size(); }

 private:
  std::vector<std::uint8_t>& out_;
};

/// Bounds-checked little-endian reader; overruns throw kTruncated.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data, std::size_t offset = 0)
      : data_(data), offset_(offset) {}

  template <typename T>
  T get() {
    if constexpr (std::is_floating_point_v<T>) {
      return std::bit_cast<double>(get<std::uint64_t>());
    } else {
      need(sizeof(T));
      T v;
      std::memcpy(&v, data_.data() + offset_, sizeof(T));
      offset_ += sizeof(T);
      return to_little_endian(v);
    }
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = data_.subspan(offset_, n);
    offset_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (n > remaining()) {
      throw Error(ErrorCode::kTruncated, "truncated: need " + std::to_string(n) +
                                             " bytes, have " + std::to_string(remaining()));
    }
  }

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return data_.size() - offset_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t offset_;
};

}  // namespace lshbloom::bytes
