#include "parsec/protocol.hpp"

#include <cstring>

namespace parsec {

std::optional<Currency> parse_currency(std::string_view symbol) {
  if (symbol == "ETH") return Currency::ETH;
  if (symbol == "BTC") return Currency::BTC;
  return std::nullopt;
}

std::string_view currency_symbol(Currency c) {
  return c == Currency::ETH ? "ETH" : "BTC";
}

std::string_view checkpoint_reason_name(CheckpointReason r) {
  switch (r) {
    case CheckpointReason::MODULO: return "MODULO";
    case CheckpointReason::TIMEOUT: return "TIMEOUT";
    case CheckpointReason::UNSCHEDULED: return "UNSCHEDULED";
  }
  return "?";
}

std::string Address::display() const {
  std::string s = hex();
  s += ':';
  s += currency_symbol(currency);
  return s;
}

Address Address::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos)
    throw ParseError("address must be <hex>:<currency>");
  const auto cur = parse_currency(text.substr(colon + 1));
  if (!cur)
    throw ParseError("Currency " + std::string(text.substr(colon + 1)) +
                     " is not an allowed currency");
  const Bytes raw = from_hex(text.substr(0, colon));
  if (raw.size() != 20) throw ParseError("address must be 20 bytes");
  Address a;
  std::memcpy(a.bytes.data(), raw.data(), 20);
  a.currency = *cur;
  return a;
}

Address derive_address(ByteSpan public_key, Currency c) {
  if (public_key.size() != PublicKey::kSize)
    throw MalformedKey("public key must be 32 bytes");
  Bytes tagged;
  tagged.reserve(public_key.size() + 1);
  tagged.push_back(currency_tag(c));
  tagged.insert(tagged.end(), public_key.begin(), public_key.end());
  const Hash256 h = digest(tagged);
  Address a;
  std::memcpy(a.bytes.data(), h.bytes.data() + 12, 20);  // last 20 bytes
  a.currency = c;
  return a;
}

// Address payload: currency tag byte followed by the 20 identifier bytes.
void append_address_field(Bytes& out, const Address& a) {
  put_u32be(out, 21);
  out.push_back(currency_tag(a.currency));
  out.insert(out.end(), a.bytes.begin(), a.bytes.end());
}

Address read_address_field(FieldReader& r) {
  ByteSpan f = r.read_fixed_field(21);
  Address a;
  if (f[0] != currency_tag(Currency::ETH) && f[0] != currency_tag(Currency::BTC))
    throw ParseError("invalid currency tag in address");
  a.currency = static_cast<Currency>(f[0]);
  std::memcpy(a.bytes.data(), f.data() + 1, 20);
  return a;
}

namespace {

void append_currency_field(Bytes& out, Currency c) {
  append_str_field(out, currency_symbol(c));
}

Currency read_currency_field(FieldReader& r) {
  const std::string s = r.read_str_field();
  const auto c = parse_currency(s);
  if (!c) throw ParseError("Currency " + s + " is not an allowed currency");
  return *c;
}

void append_hash_field(Bytes& out, const Hash256& h) {
  append_field(out, h.span());
}

Hash256 read_hash_field(FieldReader& r) {
  return Hash256::from_bytes(r.read_fixed_field(32));
}

}  // namespace

Bytes canonical_encode(const Invoice& inv, EncodeMode) {
  // Invoice carries no signatures, so both modes coincide.
  Bytes out;
  out.push_back(kTagInvoice);
  append_address_field(out, inv.invoice_address);
  append_int_field(out, inv.price);
  append_currency_field(out, inv.currency);
  append_str_field(out, inv.invoice_type);
  return out;
}

Invoice decode_invoice(ByteSpan data) {
  FieldReader r(data);
  if (r.read_raw_byte() != kTagInvoice) throw ParseError("not an invoice");
  Invoice inv;
  inv.invoice_address = read_address_field(r);
  inv.price = r.read_int_field();
  inv.currency = read_currency_field(r);
  inv.invoice_type = r.read_str_field();
  r.expect_end();
  return inv;
}

Bytes canonical_encode(const SignedInvoice& si, EncodeMode mode) {
  Bytes out;
  out.push_back(kTagSignedInvoice);
  append_str_field(out, si.invoice_id);
  if (mode == EncodeMode::Storage) {
    append_field(out, si.seller_signature.span());
    append_field(out, si.buyer_signature.span());
  }
  append_address_field(out, si.supplier_address);
  append_field(out, si.buyer_public_key.span());
  append_address_field(out, si.buyer_address);
  append_currency_field(out, si.currency);
  append_int_field(out, si.price);
  append_str_field(out, si.channel);
  append_int_field(out, si.sequence);
  append_str_field(out, si.hash_pointer_to_previous.transaction_id);
  append_hash_field(out, si.hash_pointer_to_previous.transaction_hash);
  return out;
}

SignedInvoice decode_signed_invoice(ByteSpan data) {
  FieldReader r(data);
  if (r.read_raw_byte() != kTagSignedInvoice)
    throw ParseError("not a signed invoice");
  SignedInvoice si;
  si.invoice_id = r.read_str_field();
  si.seller_signature = Signature::from_bytes(r.read_fixed_field(64));
  si.buyer_signature = Signature::from_bytes(r.read_fixed_field(64));
  si.supplier_address = read_address_field(r);
  si.buyer_public_key = PublicKey::from_bytes(r.read_fixed_field(32));
  si.buyer_address = read_address_field(r);
  si.currency = read_currency_field(r);
  si.price = r.read_int_field();
  si.channel = r.read_str_field();
  si.sequence = r.read_int_field();
  si.hash_pointer_to_previous.transaction_id = r.read_str_field();
  si.hash_pointer_to_previous.transaction_hash = read_hash_field(r);
  r.expect_end();
  return si;
}

Bytes canonical_encode(const Checkpoint& cp, EncodeMode mode) {
  Bytes out;
  out.push_back(kTagCheckpoint);
  append_str_field(out, cp.channel);
  append_int_field(out, cp.sequence);
  // Balance map: entry count, then (address, amount) pairs in address order
  // (std::map keeps them sorted).
  append_int_field(out, cp.balances.size());
  for (const auto& [addr, amount] : cp.balances) {
    append_address_field(out, addr);
    append_int_field(out, amount);
  }
  append_hash_field(out, cp.chain_head);
  if (mode == EncodeMode::Storage) {
    append_field(out, cp.seller_signature.span());
    append_field(out, cp.buyer_signature.span());
  }
  append_byte_field(out, static_cast<std::uint8_t>(cp.reason));
  return out;
}

Checkpoint decode_checkpoint(ByteSpan data) {
  FieldReader r(data);
  if (r.read_raw_byte() != kTagCheckpoint) throw ParseError("not a checkpoint");
  Checkpoint cp;
  cp.channel = r.read_str_field();
  cp.sequence = r.read_int_field();
  const std::uint64_t entries = r.read_int_field();
  for (std::uint64_t i = 0; i < entries; ++i) {
    const Address a = read_address_field(r);
    const std::uint64_t amount = r.read_int_field();
    if (!cp.balances.emplace(a, amount).second)
      throw ParseError("duplicate address in checkpoint balances");
  }
  cp.chain_head = read_hash_field(r);
  cp.seller_signature = Signature::from_bytes(r.read_fixed_field(64));
  cp.buyer_signature = Signature::from_bytes(r.read_fixed_field(64));
  const std::uint8_t reason = r.read_byte_field();
  if (reason > 2) throw ParseError("invalid checkpoint reason");
  cp.reason = static_cast<CheckpointReason>(reason);
  r.expect_end();
  return cp;
}

Hash256 produce_invoice_hash(const Invoice& inv) {
  return digest(canonical_encode(inv, EncodeMode::Signing));
}

Hash256 storage_hash(const SignedInvoice& si) {
  return digest(canonical_encode(si, EncodeMode::Storage));
}

std::string_view violation_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::DisallowedCurrency: return "DisallowedCurrency";
    case ViolationKind::CurrencyMismatch: return "CurrencyMismatch";
    case ViolationKind::InvalidBuyerAddress: return "InvalidBuyerAddress";
    case ViolationKind::BadSellerSignature: return "BadSellerSignature";
    case ViolationKind::BadBuyerSignature: return "BadBuyerSignature";
    case ViolationKind::NonPositivePrice: return "NonPositivePrice";
    case ViolationKind::ChannelMismatch: return "ChannelMismatch";
    case ViolationKind::ZeroSequence: return "ZeroSequence";
    case ViolationKind::GenesisMismatch: return "GenesisMismatch";
    case ViolationKind::SequenceMismatch: return "SequenceMismatch";
    case ViolationKind::HashPointerMismatch: return "HashPointerMismatch";
    case ViolationKind::PredecessorIdMismatch: return "PredecessorIdMismatch";
    case ViolationKind::UnknownParticipant: return "UnknownParticipant";
    case ViolationKind::EmptyChain: return "EmptyChain";
    case ViolationKind::InsufficientFunds: return "InsufficientFunds";
    case ViolationKind::ForkDetected: return "ForkDetected";
  }
  return "?";
}

std::vector<Violation> verify_signed_invoice(const SignedInvoice& si,
                                             Currency expected_currency,
                                             const Roster* roster) {
  std::vector<Violation> out;
  if (si.currency != expected_currency)
    out.push_back({ViolationKind::CurrencyMismatch,
                   std::string(currency_symbol(si.currency)) + " on a " +
                       std::string(currency_symbol(expected_currency)) +
                       " channel"});
  if (si.buyer_address != derive_address(si.buyer_public_key, si.currency))
    out.push_back({ViolationKind::InvalidBuyerAddress,
                   "buyer address does not match buyer public key"});
  const Bytes msg = signing_bytes(si);
  if (roster != nullptr) {
    const auto seller = roster->find(si.supplier_address);
    if (seller == roster->end())
      out.push_back({ViolationKind::UnknownParticipant,
                     "supplier address not in channel roster"});
    else if (!verify(seller->second, msg, si.seller_signature))
      out.push_back(
          {ViolationKind::BadSellerSignature, "seller signature invalid"});
    if (!roster->contains(si.buyer_address))
      out.push_back({ViolationKind::UnknownParticipant,
                     "buyer address not in channel roster"});
  }
  if (!verify(si.buyer_public_key, msg, si.buyer_signature))
    out.push_back({ViolationKind::BadBuyerSignature, "buyer signature invalid"});
  if (si.price == 0)
    out.push_back({ViolationKind::NonPositivePrice, "price must be positive"});
  const std::string suffix = "+" + si.channel;
  if (si.invoice_id.size() <= suffix.size() ||
      si.invoice_id.compare(si.invoice_id.size() - suffix.size(),
                            suffix.size(), suffix) != 0)
    out.push_back({ViolationKind::ChannelMismatch,
                   "invoice id does not end in +" + si.channel});
  if (si.sequence == 0)
    out.push_back({ViolationKind::ZeroSequence, "sequence must be >= 1"});
  const bool genesis = si.hash_pointer_to_previous.is_genesis();
  if ((si.sequence == 1) != genesis)
    out.push_back({ViolationKind::GenesisMismatch,
                   genesis ? "genesis pointer with sequence != 1"
                           : "sequence 1 without genesis pointer"});
  return out;
}

std::string generate_uuid(Rng& rng) {
  std::array<std::uint8_t, 16> b;
  std::uint64_t hi = rng.next(), lo = rng.next();
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(hi >> (56 - 8 * i));
  for (int i = 0; i < 8; ++i) b[8 + i] = static_cast<std::uint8_t>(lo >> (56 - 8 * i));
  b[6] = static_cast<std::uint8_t>((b[6] & 0x0f) | 0x40);  // version 4
  b[8] = static_cast<std::uint8_t>((b[8] & 0x3f) | 0x80);  // variant 1
  const std::string hex = to_hex(b);
  std::string out;
  out.reserve(36);
  out += hex.substr(0, 8);
  out += '-';
  out += hex.substr(8, 4);
  out += '-';
  out += hex.substr(12, 4);
  out += '-';
  out += hex.substr(16, 4);
  out += '-';
  out += hex.substr(20, 12);
  return out;
}

SignedInvoice make_signed_invoice(const Invoice& invoice,
                                  const SignedInvoice* predecessor,
                                  const std::string& channel,
                                  std::uint64_t sequence,
                                  const KeyPair& buyer_keys,
                                  const KeyPair& seller_keys, Rng& id_rng) {
  if (predecessor == nullptr) {
    if (sequence != 1)
      throw ConfigError("genesis transaction must have sequence 1");
  } else {
    if (sequence != predecessor->sequence + 1)
      throw ConfigError("sequence " + std::to_string(sequence) +
                        " does not follow " +
                        std::to_string(predecessor->sequence));
    if (predecessor->channel != channel)
      throw ConfigError("predecessor belongs to another channel");
  }
  if (invoice.currency != invoice.invoice_address.currency)
    throw ConfigError("invoice currency does not match its address");

  SignedInvoice si;
  si.invoice_id = generate_uuid(id_rng) + "+" + channel;
  si.supplier_address = invoice.invoice_address;
  si.buyer_public_key = buyer_keys.public_key;
  si.buyer_address = derive_address(buyer_keys.public_key, invoice.currency);
  si.currency = invoice.currency;
  si.price = invoice.price;
  si.channel = channel;
  si.sequence = sequence;
  si.hash_pointer_to_previous =
      predecessor ? HashPointer{predecessor->invoice_id,
                                storage_hash(*predecessor)}
                  : HashPointer::genesis();

  const Bytes msg = signing_bytes(si);
  si.seller_signature = sign(seller_keys.private_key, msg);
  si.buyer_signature = sign(buyer_keys.private_key, msg);
  return si;
}

void countersign(Checkpoint& cp, const SecretKey& party_a,
                 const SecretKey& party_b) {
  const Bytes msg = signing_bytes(cp);
  cp.seller_signature = sign(party_a, msg);
  cp.buyer_signature = sign(party_b, msg);
}

bool checkpoint_signatures_ok(const Checkpoint& cp, const PublicKey& party_a,
                              const PublicKey& party_b) {
  const Bytes msg = signing_bytes(cp);
  return verify(party_a, msg, cp.seller_signature) &&
         verify(party_b, msg, cp.buyer_signature);
}

}  // namespace parsec
