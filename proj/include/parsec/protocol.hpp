#pragma once

// Wire-level protocol types and the canonical byte codec.
//
// Every message encodes as a 1-byte kind tag followed by its fields in
// declaration order, each field framed as a 4-byte big-endian length plus
// payload. Integers are 8-byte big-endian payloads. The `Signing` mode
// omits signature fields (that is what gets signed); `Storage` mode keeps
// them and doubles as the on-disk record format. Golden vectors under
// testdata/ pin the encoding bit-for-bit.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parsec/bytes.hpp"
#include "parsec/crypto.hpp"
#include "parsec/rng.hpp"

namespace parsec {

// Only ETH and BTC are constructible; everything else fails at parse time.
enum class Currency : std::uint8_t { ETH = 1, BTC = 2 };

std::optional<Currency> parse_currency(std::string_view symbol);
std::string_view currency_symbol(Currency c);
inline std::uint8_t currency_tag(Currency c) {
  return static_cast<std::uint8_t>(c);
}

// 20-byte identifier derived from a public key, tagged with its currency.
struct Address {
  std::array<std::uint8_t, 20> bytes{};
  Currency currency = Currency::ETH;

  auto operator<=>(const Address&) const = default;
  std::string hex() const { return to_hex(bytes); }

  // "<40 hex>:<symbol>" round-trip, used by key files and the CLI.
  std::string display() const;
  static Address parse(std::string_view text);  // throws ParseError
};

// Last 20 bytes of digest(currency tag || public key). Pure: equal inputs
// give equal addresses; the tag keeps ETH and BTC addresses apart.
Address derive_address(ByteSpan public_key, Currency c);  // throws MalformedKey
inline Address derive_address(const PublicKey& pk, Currency c) {
  return derive_address(pk.span(), c);
}

struct Invoice {
  Address invoice_address;        // seller's receiving address
  std::uint64_t price = 0;        // smallest currency unit
  Currency currency = Currency::ETH;
  std::string invoice_type;       // opaque metadata, hashed but uninterpreted
};

// Link to the predecessor transaction. Genesis is (empty id, ZERO hash).
struct HashPointer {
  std::string transaction_id;   // predecessor's invoice id
  Hash256 transaction_hash;     // digest of predecessor's storage bytes

  bool operator==(const HashPointer&) const = default;
  bool is_genesis() const {
    return transaction_id.empty() && transaction_hash.is_zero();
  }
  static HashPointer genesis() { return {}; }
};

struct SignedInvoice {
  std::string invoice_id;           // lowercase UUID + "+" + channel
  Signature seller_signature;
  Signature buyer_signature;
  Address supplier_address;
  PublicKey buyer_public_key;
  Address buyer_address;
  Currency currency = Currency::ETH;
  std::uint64_t price = 0;
  std::string channel;
  std::uint64_t sequence = 0;       // per-channel, strictly increasing from 1
  HashPointer hash_pointer_to_previous;

  bool operator==(const SignedInvoice&) const = default;
};

enum class CheckpointReason : std::uint8_t {
  MODULO = 0,
  TIMEOUT = 1,
  UNSCHEDULED = 2,
};
std::string_view checkpoint_reason_name(CheckpointReason r);

// Dual-signed balance statement at a sequence number. The seller slot is
// signed by party A of the channel, the buyer slot by party B.
struct Checkpoint {
  std::string channel;
  std::uint64_t sequence = 0;  // sequence of the last included transaction
  std::map<Address, std::uint64_t> balances;
  Hash256 chain_head;          // storage hash of the last included transaction
  Signature seller_signature;
  Signature buyer_signature;
  CheckpointReason reason = CheckpointReason::MODULO;

  bool operator==(const Checkpoint&) const = default;
};

enum class EncodeMode { Signing, Storage };

// Message kind tags (first byte of every encoding).
inline constexpr std::uint8_t kTagInvoice = 0x01;
inline constexpr std::uint8_t kTagSignedInvoice = 0x02;
inline constexpr std::uint8_t kTagCheckpoint = 0x03;
inline constexpr std::uint8_t kTagControl = 0x04;
inline constexpr std::uint8_t kTagChannelConfig = 0x05;
inline constexpr std::uint8_t kTagNodeMeta = 0x06;

Bytes canonical_encode(const Invoice& inv, EncodeMode mode = EncodeMode::Storage);
Bytes canonical_encode(const SignedInvoice& si, EncodeMode mode);
Bytes canonical_encode(const Checkpoint& cp, EncodeMode mode);

// Reused by the other message encoders (control, config).
void append_address_field(Bytes& out, const Address& a);
Address read_address_field(FieldReader& r);

Invoice decode_invoice(ByteSpan data);              // throws ParseError
SignedInvoice decode_signed_invoice(ByteSpan data);
Checkpoint decode_checkpoint(ByteSpan data);

// digest(signing-mode encoding).
Hash256 produce_invoice_hash(const Invoice& inv);

// digest(storage-mode encoding); this is what successor hash pointers and
// checkpoint chain heads reference.
Hash256 storage_hash(const SignedInvoice& si);

inline Bytes signing_bytes(const SignedInvoice& si) {
  return canonical_encode(si, EncodeMode::Signing);
}
inline Bytes signing_bytes(const Checkpoint& cp) {
  return canonical_encode(cp, EncodeMode::Signing);
}

enum class ViolationKind {
  DisallowedCurrency,
  CurrencyMismatch,
  InvalidBuyerAddress,
  BadSellerSignature,
  BadBuyerSignature,
  NonPositivePrice,
  ChannelMismatch,
  ZeroSequence,
  GenesisMismatch,       // sequence 1 without genesis pointer, or vice versa
  SequenceMismatch,
  HashPointerMismatch,
  PredecessorIdMismatch,
  UnknownParticipant,    // supplier or buyer address outside the roster
  EmptyChain,
  InsufficientFunds,
  ForkDetected,          // two signed transactions claim the same slot
};
std::string_view violation_name(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::string detail;
};

// The channel roster: address -> public key for every party. A message
// embeds only the buyer's public key, so checking the seller signature
// needs the roster to resolve the supplier address.
using Roster = std::map<Address, PublicKey>;

// Stateless checks, in order: currency allowed and equal to expected; buyer
// address matches the buyer public key; both signatures; price > 0; invoice
// id suffix matches the channel; sequence/genesis coherence. Without a
// roster the seller signature cannot be resolved and is skipped. Returns
// every violation found, never throws.
std::vector<Violation> verify_signed_invoice(const SignedInvoice& si,
                                             Currency expected_currency,
                                             const Roster* roster = nullptr);

// Lowercase UUIDv4 drawn from the given rng.
std::string generate_uuid(Rng& rng);

// Builds and co-signs the next transaction on a channel. `predecessor` is
// null for the genesis transaction. Throws ConfigError on sequence or
// currency mismatch.
SignedInvoice make_signed_invoice(const Invoice& invoice,
                                  const SignedInvoice* predecessor,
                                  const std::string& channel,
                                  std::uint64_t sequence,
                                  const KeyPair& buyer_keys,
                                  const KeyPair& seller_keys, Rng& id_rng);

// Checkpoint co-signing and verification. Party A signs the seller slot,
// party B the buyer slot.
void countersign(Checkpoint& cp, const SecretKey& party_a,
                 const SecretKey& party_b);
bool checkpoint_signatures_ok(const Checkpoint& cp, const PublicKey& party_a,
                              const PublicKey& party_b);

}  // namespace parsec
