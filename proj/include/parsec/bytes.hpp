#pragma once

// Byte-buffer helpers shared by the canonical codec, the log framing and
// the CLI: big-endian integer i/o, length-prefixed fields, hex.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace parsec {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

// Logical simulation time. All timeouts, challenge windows and checkpoint
// clocks run on this tick clock, never on wall time.
using Tick = std::uint64_t;

struct ParsecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Malformed bytes, files or scenario text.
struct ParseError : ParsecError {
  using ParsecError::ParsecError;
};
// Invalid configuration or misuse of a constructor/operation precondition.
struct ConfigError : ParsecError {
  using ParsecError::ParsecError;
};
struct IoError : ParsecError {
  using ParsecError::ParsecError;
};

inline void put_u32be(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u64be(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8)
    out.push_back(static_cast<std::uint8_t>(v >> shift));
}

inline std::uint32_t get_u32be(ByteSpan b) {
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

inline std::uint64_t get_u64be(ByteSpan b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | b[i];
  return v;
}

// One field of a canonical encoding: 4-byte big-endian length, then payload.
inline void append_field(Bytes& out, ByteSpan payload) {
  put_u32be(out, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
}

inline void append_str_field(Bytes& out, std::string_view s) {
  put_u32be(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

// Integer fields carry an 8-byte big-endian payload.
inline void append_int_field(Bytes& out, std::uint64_t v) {
  put_u32be(out, 8);
  put_u64be(out, v);
}

inline void append_byte_field(Bytes& out, std::uint8_t v) {
  put_u32be(out, 1);
  out.push_back(v);
}

// Strict reader over a canonical encoding. Throws ParseError on any
// truncation or length mismatch; decoders call expect_end() so trailing
// bytes are rejected too.
class FieldReader {
 public:
  explicit FieldReader(ByteSpan data) : data_(data) {}

  bool done() const { return pos_ == data_.size(); }

  std::uint8_t read_raw_byte() {
    need(1);
    return data_[pos_++];
  }

  ByteSpan read_field() {
    need(4);
    const std::uint32_t len = get_u32be(data_.subspan(pos_, 4));
    pos_ += 4;
    need(len);
    ByteSpan payload = data_.subspan(pos_, len);
    pos_ += len;
    return payload;
  }

  ByteSpan read_fixed_field(std::size_t expected) {
    ByteSpan f = read_field();
    if (f.size() != expected)
      throw ParseError("field length " + std::to_string(f.size()) +
                       ", expected " + std::to_string(expected));
    return f;
  }

  std::uint64_t read_int_field() { return get_u64be(read_fixed_field(8)); }

  std::uint8_t read_byte_field() { return read_fixed_field(1)[0]; }

  std::string read_str_field() {
    ByteSpan f = read_field();
    return std::string(reinterpret_cast<const char*>(f.data()), f.size());
  }

  void expect_end() const {
    if (!done()) throw ParseError("trailing bytes after message");
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ParseError("truncated message");
  }

  ByteSpan data_;
  std::size_t pos_ = 0;
};

std::string to_hex(ByteSpan data);
Bytes from_hex(std::string_view hex);  // throws ParseError on odd/garbage input

inline ByteSpan str_bytes(std::string_view s) {
  return ByteSpan(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

}  // namespace parsec
