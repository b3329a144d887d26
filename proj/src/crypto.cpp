#include "parsec/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>

namespace parsec {

const Hash256 Hash256::ZERO = {};

void crypto_init() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    if (sodium_init() < 0) throw ParsecError("libsodium failed to initialize");
  });
}

Hash256 Hash256::from_bytes(ByteSpan b) {
  if (b.size() != 32) throw ParseError("hash must be 32 bytes");
  Hash256 h;
  std::memcpy(h.bytes.data(), b.data(), 32);
  return h;
}

Hash256 Hash256::from_hex(std::string_view s) {
  return from_bytes(parsec::from_hex(s));
}

Hash256 digest(ByteSpan data) {
  crypto_init();
  Hash256 h;
  crypto_hash_sha256(h.bytes.data(), data.data(), data.size());
  return h;
}

PublicKey PublicKey::from_bytes(ByteSpan b) {
  if (b.size() != kSize) throw MalformedKey("public key must be 32 bytes");
  PublicKey k;
  std::memcpy(k.bytes.data(), b.data(), kSize);
  return k;
}

SecretKey SecretKey::from_bytes(ByteSpan b) {
  if (b.size() != kSize) throw MalformedKey("secret key must be 64 bytes");
  SecretKey k;
  std::memcpy(k.bytes.data(), b.data(), kSize);
  return k;
}

Signature Signature::from_bytes(ByteSpan b) {
  if (b.size() != kSize) throw MalformedSignature("signature must be 64 bytes");
  Signature s;
  std::memcpy(s.bytes.data(), b.data(), kSize);
  return s;
}

KeyPair KeyPair::generate() {
  crypto_init();
  KeyPair kp;
  crypto_sign_keypair(kp.public_key.bytes.data(), kp.private_key.bytes.data());
  return kp;
}

KeyPair KeyPair::from_seed(ByteSpan seed) {
  crypto_init();
  if (seed.size() != crypto_sign_SEEDBYTES)
    throw MalformedKey("key seed must be 32 bytes");
  KeyPair kp;
  crypto_sign_seed_keypair(kp.public_key.bytes.data(),
                           kp.private_key.bytes.data(), seed.data());
  return kp;
}

Signature sign(const SecretKey& key, ByteSpan message) {
  crypto_init();
  Signature sig;
  unsigned long long len = 0;
  crypto_sign_detached(sig.bytes.data(), &len, message.data(), message.size(),
                       key.bytes.data());
  return sig;
}

bool verify(const PublicKey& key, ByteSpan message, const Signature& sig) {
  crypto_init();
  return crypto_sign_verify_detached(sig.bytes.data(), message.data(),
                                     message.size(), key.bytes.data()) == 0;
}

PublicKey public_key_of(const SecretKey& key) {
  crypto_init();
  PublicKey pk;
  crypto_sign_ed25519_sk_to_pk(pk.bytes.data(), key.bytes.data());
  return pk;
}

}  // namespace parsec
