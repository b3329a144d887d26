#pragma once

// The channel node: consumes one channel's delivery stream, rebuilds exact
// order inside a bounded reorder buffer, keeps balances, and emits
// checkpoints / settlement material. One node instance per (channel, party
// pair); in simulation both parties co-sign synchronously, so a single
// instance holds both secret keys.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "parsec/chain.hpp"
#include "parsec/crypto.hpp"
#include "parsec/event_log.hpp"
#include "parsec/protocol.hpp"

namespace parsec {

struct ChannelConfig {
  std::string channel = "default";
  Currency currency = Currency::ETH;
  Address party_a;
  Address party_b;
  PublicKey pubkey_a;
  PublicKey pubkey_b;
  std::uint64_t deposit_a = 0;
  std::uint64_t deposit_b = 0;
  std::uint32_t n = 1;             // reorder-buffer capacity
  std::uint64_t m = 1;             // checkpoint modulo
  Tick checkpoint_timeout = 0;     // 0 disables the timer

  void validate() const;  // throws ConfigError
  Roster roster() const;
  std::uint64_t total_deposits() const { return deposit_a + deposit_b; }

  bool operator==(const ChannelConfig&) const = default;
};

Bytes encode_config(const ChannelConfig& cfg);
ChannelConfig decode_config(ByteSpan bytes);

struct NodeOutput {
  enum class Kind { CHECKPOINT, SETTLEMENT_REQUEST, DISPUTE_SUBMISSION };
  Kind kind = Kind::CHECKPOINT;
  Checkpoint checkpoint;                  // CHECKPOINT, SETTLEMENT_REQUEST
  std::vector<SignedInvoice> transcript;  // DISPUTE_SUBMISSION
};
std::string_view node_output_name(NodeOutput::Kind k);

enum class IngestStatus {
  Applied,          // applied (possibly draining pending successors)
  Duplicate,        // invoice_id already applied; no-op
  Held,             // out of order, parked in the reorder buffer
  Rejected,         // failed verification; state unchanged
  WindowExceeded,   // sequence beyond next + n
  FundsViolation,   // co-signed overdraft; chain poisoned from here on
  Poisoned,         // dropped because the chain is already poisoned
};
std::string_view ingest_status_name(IngestStatus s);

struct IngestResult {
  IngestStatus status = IngestStatus::Rejected;
  std::vector<Violation> violations;
  std::uint64_t applied_count = 0;         // applications caused by this call
  std::vector<NodeOutput> outputs;         // checkpoints triggered
};

// Orders `buffer` into the maximal chain extending `chain_head`; unlinkable
// elements stay in `remaining`. Two buffered elements claiming the same
// predecessor are signed fork evidence.
struct ReconstructResult {
  std::vector<SignedInvoice> ordered;
  std::vector<SignedInvoice> remaining;
};
class ForkDetected : public ParsecError {
 public:
  using ParsecError::ParsecError;
};
ReconstructResult reconstruct_order(std::vector<SignedInvoice> buffer,
                                    const Hash256& chain_head);

class ChannelNode {
 public:
  ChannelNode(ChannelConfig config, SecretKey secret_a, SecretKey secret_b,
              Tick now = 0);

  IngestResult ingest(const SignedInvoice& si, Tick now);
  // Same fold as calling ingest element by element; signature verification
  // is hoisted out and runs data-parallel.
  std::vector<IngestResult> ingest_batch(std::span<const SignedInvoice> batch,
                                         Tick now);
  // Fires a TIMEOUT checkpoint once the oldest uncommitted transaction has
  // sat for checkpoint_timeout ticks; one fire per idle stretch.
  std::optional<NodeOutput> on_tick(Tick now);
  // Dispute transcripts start after `settled_baseline` (defaults to the last
  // emitted checkpoint, which mirrors what the contract holds when every
  // checkpoint is submitted on emission).
  NodeOutput handle_control(const ControlMessage& msg, Tick now,
                            std::optional<std::uint64_t> settled_baseline =
                                std::nullopt);

  const ChannelConfig& config() const { return config_; }
  const std::map<Address, std::uint64_t>& balances() const { return balances_; }
  const Hash256& chain_head() const { return chain_head_; }
  std::uint64_t next_sequence() const { return next_sequence_; }
  std::size_t pending_size() const { return pending_.size(); }
  std::uint64_t last_checkpoint_sequence() const {
    return last_checkpoint_sequence_;
  }
  const std::vector<SignedInvoice>& applied_chain() const { return chain_; }
  bool poisoned() const { return poisoned_; }

  // Crash/restart support: config + meta + applied chain, .plog framing.
  void snapshot(const std::filesystem::path& path) const;
  static ChannelNode restore(const std::filesystem::path& path,
                             SecretKey secret_a, SecretKey secret_b);

 private:
  IngestResult ingest_preverified(const SignedInvoice& si,
                                  const std::vector<Violation>& violations,
                                  Tick now);
  void apply(const SignedInvoice& si, Tick now);
  std::optional<NodeOutput> maybe_checkpoint(Tick now, bool after_apply);
  Checkpoint make_checkpoint(CheckpointReason reason) const;
  void assert_conservation() const;

  ChannelConfig config_;
  Roster roster_;
  SecretKey secret_a_;
  SecretKey secret_b_;

  std::set<std::string> applied_ids_;
  std::vector<SignedInvoice> chain_;
  Hash256 chain_head_;  // ZERO before the first application
  std::uint64_t next_sequence_ = 1;
  std::map<Address, std::uint64_t> balances_;
  std::map<std::uint64_t, SignedInvoice> pending_;  // keyed by sequence
  std::uint64_t last_checkpoint_sequence_ = 0;
  Tick timer_armed_at_ = 0;  // apply time of the oldest uncommitted tx
  bool poisoned_ = false;
};

}  // namespace parsec
