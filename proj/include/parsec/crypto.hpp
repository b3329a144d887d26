#pragma once

// Hashing, keys and signatures. Backed by libsodium: SHA-256 for all
// digests (the repo's fixed 256-bit hash, pinned by the golden files under
// testdata/) and Ed25519 for signing. Ed25519 signing is deterministic,
// which the byte-identical report guarantee relies on.

#include <array>
#include <compare>

#include "parsec/bytes.hpp"

namespace parsec {

struct MalformedKey : ParsecError {
  using ParsecError::ParsecError;
};
struct MalformedSignature : ParsecError {
  using ParsecError::ParsecError;
};

struct Hash256 {
  std::array<std::uint8_t, 32> bytes{};

  // All-zero digest, reserved as the genesis predecessor marker.
  static const Hash256 ZERO;

  auto operator<=>(const Hash256&) const = default;
  bool is_zero() const { return *this == ZERO; }
  std::string hex() const { return to_hex(bytes); }
  ByteSpan span() const { return ByteSpan(bytes.data(), bytes.size()); }

  static Hash256 from_bytes(ByteSpan b);  // throws ParseError unless 32 bytes
  static Hash256 from_hex(std::string_view h);
};

// SHA-256 of arbitrary bytes.
Hash256 digest(ByteSpan data);

struct PublicKey {
  static constexpr std::size_t kSize = 32;
  std::array<std::uint8_t, kSize> bytes{};

  auto operator<=>(const PublicKey&) const = default;
  ByteSpan span() const { return ByteSpan(bytes.data(), bytes.size()); }
  std::string hex() const { return to_hex(bytes); }
  static PublicKey from_bytes(ByteSpan b);  // throws MalformedKey
};

// Ed25519 expanded secret key (seed || public key).
struct SecretKey {
  static constexpr std::size_t kSize = 64;
  std::array<std::uint8_t, kSize> bytes{};

  ByteSpan span() const { return ByteSpan(bytes.data(), bytes.size()); }
  static SecretKey from_bytes(ByteSpan b);  // throws MalformedKey
};

struct Signature {
  static constexpr std::size_t kSize = 64;
  std::array<std::uint8_t, kSize> bytes{};

  auto operator<=>(const Signature&) const = default;
  ByteSpan span() const { return ByteSpan(bytes.data(), bytes.size()); }
  std::string hex() const { return to_hex(bytes); }
  static Signature from_bytes(ByteSpan b);  // throws MalformedSignature
};

struct KeyPair {
  PublicKey public_key;
  SecretKey private_key;

  static KeyPair generate();                // system randomness
  static KeyPair from_seed(ByteSpan seed);  // deterministic, 32-byte seed
};

Signature sign(const SecretKey& key, ByteSpan message);
bool verify(const PublicKey& key, ByteSpan message, const Signature& sig);
PublicKey public_key_of(const SecretKey& key);

// Idempotent libsodium initialization; every entry point calls this once.
void crypto_init();

}  // namespace parsec
