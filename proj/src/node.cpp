#include "parsec/node.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "parsec/plog.hpp"

namespace parsec {

void ChannelConfig::validate() const {
  if (channel.empty()) throw ConfigError("channel name must not be empty");
  if (party_a == party_b) throw ConfigError("channel parties must differ");
  if (party_a.currency != currency || party_b.currency != currency)
    throw ConfigError("party addresses must match the channel currency");
  if (n < 1) throw ConfigError("reorder buffer capacity must be >= 1");
  if (m < 1) throw ConfigError("checkpoint modulo must be >= 1");
  if (derive_address(pubkey_a.span(), currency) != party_a ||
      derive_address(pubkey_b.span(), currency) != party_b)
    throw ConfigError("party address does not match its public key");
}

Roster ChannelConfig::roster() const {
  return {{party_a, pubkey_a}, {party_b, pubkey_b}};
}

Bytes encode_config(const ChannelConfig& cfg) {
  Bytes out;
  out.push_back(kTagChannelConfig);
  append_str_field(out, cfg.channel);
  append_str_field(out, currency_symbol(cfg.currency));
  append_address_field(out, cfg.party_a);
  append_address_field(out, cfg.party_b);
  append_field(out, cfg.pubkey_a.span());
  append_field(out, cfg.pubkey_b.span());
  append_int_field(out, cfg.deposit_a);
  append_int_field(out, cfg.deposit_b);
  append_int_field(out, cfg.n);
  append_int_field(out, cfg.m);
  append_int_field(out, cfg.checkpoint_timeout);
  return out;
}

ChannelConfig decode_config(ByteSpan bytes) {
  FieldReader r(bytes);
  if (r.read_raw_byte() != kTagChannelConfig)
    throw ParseError("not a channel config");
  ChannelConfig cfg;
  cfg.channel = r.read_str_field();
  const auto c = parse_currency(r.read_str_field());
  if (!c) throw ParseError("bad currency in config");
  cfg.currency = *c;
  cfg.party_a = read_address_field(r);
  cfg.party_b = read_address_field(r);
  cfg.pubkey_a = PublicKey::from_bytes(r.read_fixed_field(PublicKey::kSize));
  cfg.pubkey_b = PublicKey::from_bytes(r.read_fixed_field(PublicKey::kSize));
  cfg.deposit_a = r.read_int_field();
  cfg.deposit_b = r.read_int_field();
  const std::uint64_t n = r.read_int_field();
  if (n > std::numeric_limits<std::uint32_t>::max())
    throw ParseError("reorder capacity out of range");
  cfg.n = static_cast<std::uint32_t>(n);
  cfg.m = r.read_int_field();
  cfg.checkpoint_timeout = r.read_int_field();
  r.expect_end();
  cfg.validate();
  return cfg;
}

std::string_view node_output_name(NodeOutput::Kind k) {
  switch (k) {
    case NodeOutput::Kind::CHECKPOINT: return "CHECKPOINT";
    case NodeOutput::Kind::SETTLEMENT_REQUEST: return "SETTLEMENT_REQUEST";
    case NodeOutput::Kind::DISPUTE_SUBMISSION: return "DISPUTE_SUBMISSION";
  }
  return "?";
}

std::string_view ingest_status_name(IngestStatus s) {
  switch (s) {
    case IngestStatus::Applied: return "Applied";
    case IngestStatus::Duplicate: return "Duplicate";
    case IngestStatus::Held: return "Held";
    case IngestStatus::Rejected: return "Rejected";
    case IngestStatus::WindowExceeded: return "WindowExceeded";
    case IngestStatus::FundsViolation: return "FundsViolation";
    case IngestStatus::Poisoned: return "Poisoned";
  }
  return "?";
}

ReconstructResult reconstruct_order(std::vector<SignedInvoice> buffer,
                                    const Hash256& chain_head) {
  // Deduplicate byte-identical copies, then demand unique predecessors.
  std::map<Hash256, SignedInvoice> by_hash;
  for (auto& si : buffer) by_hash.emplace(storage_hash(si), std::move(si));
  std::map<Hash256, std::vector<const SignedInvoice*>> by_pred;
  for (const auto& [h, si] : by_hash)
    by_pred[si.hash_pointer_to_previous.transaction_hash].push_back(&si);
  for (const auto& [pred, claimants] : by_pred)
    if (claimants.size() > 1)
      throw ForkDetected("two signed transactions extend " + pred.hex());

  ReconstructResult out;
  Hash256 head = chain_head;
  for (;;) {
    const auto it = by_pred.find(head);
    if (it == by_pred.end()) break;
    const SignedInvoice* next = it->second.front();
    head = storage_hash(*next);
    out.ordered.push_back(*next);
    by_pred.erase(it);
  }
  for (auto& [pred, claimants] : by_pred)
    for (const SignedInvoice* si : claimants) out.remaining.push_back(*si);
  return out;
}

ChannelNode::ChannelNode(ChannelConfig config, SecretKey secret_a,
                         SecretKey secret_b, Tick now)
    : config_(std::move(config)),
      secret_a_(secret_a),
      secret_b_(secret_b),
      timer_armed_at_(now) {
  config_.validate();
  if (public_key_of(secret_a_) != config_.pubkey_a ||
      public_key_of(secret_b_) != config_.pubkey_b)
    throw ConfigError("secret keys do not match channel public keys");
  roster_ = config_.roster();
  balances_[config_.party_a] = config_.deposit_a;
  balances_[config_.party_b] = config_.deposit_b;
}

void ChannelNode::assert_conservation() const {
  std::uint64_t sum = 0;
  for (const auto& [addr, amount] : balances_) sum += amount;
  if (sum != config_.total_deposits())
    throw std::logic_error("channel balance conservation violated");
}

void ChannelNode::apply(const SignedInvoice& si, Tick now) {
  if (si.sequence == last_checkpoint_sequence_ + 1) timer_armed_at_ = now;
  balances_.at(si.buyer_address) -= si.price;
  balances_.at(si.supplier_address) += si.price;
  applied_ids_.insert(si.invoice_id);
  chain_head_ = storage_hash(si);
  chain_.push_back(si);
  ++next_sequence_;
  assert_conservation();
}

Checkpoint ChannelNode::make_checkpoint(CheckpointReason reason) const {
  Checkpoint cp;
  cp.channel = config_.channel;
  cp.sequence = next_sequence_ - 1;
  cp.balances = balances_;
  cp.chain_head = chain_head_;
  cp.reason = reason;
  countersign(cp, secret_a_, secret_b_);
  return cp;
}

std::optional<NodeOutput> ChannelNode::maybe_checkpoint(Tick now,
                                                        bool after_apply) {
  const std::uint64_t s = next_sequence_ - 1;
  CheckpointReason reason;
  if (after_apply && s > 0 && s % config_.m == 0 &&
      s > last_checkpoint_sequence_) {
    reason = CheckpointReason::MODULO;
  } else if (config_.checkpoint_timeout > 0 &&
             s > last_checkpoint_sequence_ &&
             now - timer_armed_at_ >= config_.checkpoint_timeout) {
    reason = CheckpointReason::TIMEOUT;
  } else {
    return std::nullopt;
  }
  NodeOutput out;
  out.kind = NodeOutput::Kind::CHECKPOINT;
  out.checkpoint = make_checkpoint(reason);
  last_checkpoint_sequence_ = s;
  return out;
}

IngestResult ChannelNode::ingest(const SignedInvoice& si, Tick now) {
  return ingest_preverified(
      si, verify_signed_invoice(si, config_.currency, &roster_), now);
}

std::vector<IngestResult> ChannelNode::ingest_batch(
    std::span<const SignedInvoice> batch, Tick now) {
  std::vector<std::vector<Violation>> pre(batch.size());
  const std::int64_t count = static_cast<std::int64_t>(batch.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (std::int64_t i = 0; i < count; ++i)
    pre[i] = verify_signed_invoice(batch[i], config_.currency, &roster_);

  std::vector<IngestResult> results;
  results.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    results.push_back(ingest_preverified(batch[i], pre[i], now));
  return results;
}

IngestResult ChannelNode::ingest_preverified(
    const SignedInvoice& si, const std::vector<Violation>& violations,
    Tick now) {
  IngestResult result;
  if (poisoned_) {
    result.status = IngestStatus::Poisoned;
    return result;
  }
  if (applied_ids_.contains(si.invoice_id)) {
    result.status = IngestStatus::Duplicate;
    return result;
  }
  if (si.channel != config_.channel) {
    result.status = IngestStatus::Rejected;
    result.violations.push_back({ViolationKind::ChannelMismatch,
                                 "transaction for channel " + si.channel});
    return result;
  }
  if (!violations.empty()) {
    result.status = IngestStatus::Rejected;
    result.violations = violations;
    return result;
  }

  if (si.sequence < next_sequence_) {
    // Unknown id below the applied height: a second signed transaction for
    // an occupied slot.
    result.status = IngestStatus::Rejected;
    result.violations.push_back(
        {ViolationKind::ForkDetected,
         "conflicting transaction for settled sequence " +
             std::to_string(si.sequence)});
    return result;
  }
  if (si.sequence > next_sequence_ + config_.n) {
    result.status = IngestStatus::WindowExceeded;
    result.violations.push_back(
        {ViolationKind::SequenceMismatch,
         "sequence " + std::to_string(si.sequence) + " beyond window end " +
             std::to_string(next_sequence_ + config_.n)});
    return result;
  }
  if (si.sequence > next_sequence_) {
    const auto it = pending_.find(si.sequence);
    if (it != pending_.end()) {
      if (storage_hash(it->second) != storage_hash(si)) {
        result.status = IngestStatus::Rejected;
        result.violations.push_back(
            {ViolationKind::ForkDetected,
             "conflicting transaction for pending sequence " +
                 std::to_string(si.sequence)});
        return result;
      }
      result.status = IngestStatus::Duplicate;
      return result;
    }
    pending_.emplace(si.sequence, si);
    result.status = IngestStatus::Held;
    return result;
  }

  // si.sequence == next_sequence_: check linkage, then apply and drain.
  const SignedInvoice* candidate = &si;
  for (;;) {
    if (chain_.empty()) {
      if (!candidate->hash_pointer_to_previous.is_genesis()) {
        result.status = IngestStatus::Rejected;
        result.violations.push_back({ViolationKind::GenesisMismatch,
                                     "first transaction must carry the "
                                     "genesis pointer"});
        return result;
      }
    } else {
      const bool hash_ok =
          candidate->hash_pointer_to_previous.transaction_hash == chain_head_;
      const bool id_ok = candidate->hash_pointer_to_previous.transaction_id ==
                         chain_.back().invoice_id;
      if (!hash_ok || !id_ok) {
        result.violations.push_back(
            {hash_ok ? ViolationKind::PredecessorIdMismatch
                     : ViolationKind::HashPointerMismatch,
             "transaction " + std::to_string(candidate->sequence) +
                 " does not link to the applied chain"});
        if (candidate == &si) {
          result.status = IngestStatus::Rejected;
          return result;
        }
        pending_.erase(candidate->sequence);  // drop bad drained entry
        break;
      }
    }
    if (balances_.at(candidate->buyer_address) < candidate->price) {
      result.violations.push_back(
          {ViolationKind::InsufficientFunds,
           "price " + std::to_string(candidate->price) + " exceeds buyer "
               "balance at sequence " + std::to_string(candidate->sequence)});
      poisoned_ = true;
      result.status = IngestStatus::FundsViolation;
      return result;
    }

    apply(*candidate, now);
    ++result.applied_count;
    if (auto cp = maybe_checkpoint(now, true)) result.outputs.push_back(*cp);
    if (candidate != &si) pending_.erase(candidate->sequence);

    const auto next = pending_.find(next_sequence_);
    if (next == pending_.end()) break;
    candidate = &next->second;
  }
  result.status = IngestStatus::Applied;
  return result;
}

std::optional<NodeOutput> ChannelNode::on_tick(Tick now) {
  return maybe_checkpoint(now, false);
}

NodeOutput ChannelNode::handle_control(const ControlMessage& msg, Tick,
                                       std::optional<std::uint64_t>
                                           settled_baseline) {
  if (msg.channel != config_.channel)
    throw ConfigError("control message for unknown channel " + msg.channel);
  NodeOutput out;
  if (msg.kind == ControlKind::UNSCHEDULED_SETTLEMENT) {
    out.kind = NodeOutput::Kind::SETTLEMENT_REQUEST;
    out.checkpoint = make_checkpoint(CheckpointReason::UNSCHEDULED);
    last_checkpoint_sequence_ =
        std::max(last_checkpoint_sequence_, out.checkpoint.sequence);
    return out;
  }
  out.kind = NodeOutput::Kind::DISPUTE_SUBMISSION;
  const std::uint64_t since =
      settled_baseline.value_or(last_checkpoint_sequence_);
  for (const SignedInvoice& si : chain_)
    if (si.sequence > since) out.transcript.push_back(si);
  return out;
}

namespace {

constexpr std::uint64_t kMetaVersion = 1;

Bytes encode_node_meta(std::uint64_t last_cp_seq, Tick timer_armed_at,
                       bool poisoned) {
  Bytes out;
  out.push_back(kTagNodeMeta);
  append_int_field(out, kMetaVersion);
  append_int_field(out, last_cp_seq);
  append_int_field(out, timer_armed_at);
  append_int_field(out, poisoned ? 1 : 0);
  return out;
}

}  // namespace

void ChannelNode::snapshot(const std::filesystem::path& path) const {
  std::vector<Bytes> frames;
  frames.push_back(encode_config(config_));
  frames.push_back(encode_node_meta(last_checkpoint_sequence_,
                                    timer_armed_at_, poisoned_));
  for (const SignedInvoice& si : chain_)
    frames.push_back(canonical_encode(si, EncodeMode::Storage));
  write_plog(path, frames);
}

ChannelNode ChannelNode::restore(const std::filesystem::path& path,
                                 SecretKey secret_a, SecretKey secret_b) {
  const std::vector<Bytes> frames = read_plog(path);
  if (frames.size() < 2) throw ParseError("snapshot too short");
  const ChannelConfig cfg = decode_config(frames[0]);

  FieldReader meta(frames[1]);
  if (meta.read_raw_byte() != kTagNodeMeta)
    throw ParseError("snapshot missing node meta");
  if (meta.read_int_field() != kMetaVersion)
    throw ParseError("unsupported snapshot version");
  const std::uint64_t last_cp_seq = meta.read_int_field();
  const Tick armed_at = meta.read_int_field();
  const std::uint64_t poisoned = meta.read_int_field();
  meta.expect_end();

  std::vector<SignedInvoice> chain;
  for (std::size_t i = 2; i < frames.size(); ++i)
    chain.push_back(decode_signed_invoice(frames[i]));
  const Roster roster = cfg.roster();
  if (const auto fault = verify_chain(chain, cfg.currency, &roster))
    throw ParseError("snapshot chain invalid at position " +
                     std::to_string(fault->position) + ": " +
                     fault->violation.detail);

  ChannelNode node(cfg, secret_a, secret_b, armed_at);
  for (const SignedInvoice& si : chain) {
    if (node.balances_.at(si.buyer_address) < si.price)
      throw ParseError("snapshot chain overdraws a balance");
    node.apply(si, armed_at);
  }
  node.last_checkpoint_sequence_ = last_cp_seq;
  node.timer_armed_at_ = armed_at;
  node.poisoned_ = poisoned != 0;
  return node;
}

}  // namespace parsec
