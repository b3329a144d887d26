#pragma once

// Simulated on-chain escrow: holds deposits, tracks the latest dual-signed
// checkpoint, runs challenge-period settlement with dispute-by-replay, and
// carries hashed timelock locks. Rejected calls leave state untouched and
// come back as result values, so a driver can keep running and record
// outcomes; exceptions are reserved for malformed setups.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "parsec/node.hpp"
#include "parsec/protocol.hpp"

namespace parsec {

enum class HtlcStatus { OPEN, CLAIMED, REFUNDED };
std::string_view htlc_status_name(HtlcStatus s);

struct Htlc {
  std::string lock_id;
  std::uint64_t amount = 0;
  Hash256 hash_lock;
  Tick timeout = 0;
  Address payer;
  Address payee;
  HtlcStatus status = HtlcStatus::OPEN;
};

struct ChallengeParams {
  Tick challenge_period = 100;
  void validate() const;  // throws ConfigError
};

enum class EscrowStatus {
  Ok,
  StaleCheckpoint,
  BadSignature,
  WrongChannel,
  ConservationViolation,
  AlreadyFinalized,
  NothingPending,
  ChallengeWindowClosed,
  InvalidTranscript,
  NotNewer,
  ChallengeStillOpen,
  InsufficientFunds,
  BadTimeout,
  InvalidAmount,
  UnknownParty,
  UnknownLock,
  WrongPreimage,
  Expired,
  NotYetExpired,
  NotOpen,
};
std::string_view escrow_status_name(EscrowStatus s);

struct EscrowResult {
  EscrowStatus status = EscrowStatus::Ok;
  std::string detail;
  std::uint64_t index = 0;  // failing transcript index for InvalidTranscript
  bool ok() const { return status == EscrowStatus::Ok; }
};

class EscrowContract {
 public:
  enum class Phase { None, Pending, Finalized };

  EscrowContract(ChannelConfig config, ChallengeParams params);

  EscrowResult submit_checkpoint(const Checkpoint& cp, Tick now);
  // Same validation as submit_checkpoint, but a sequence equal to the
  // latest checkpoint is accepted: settling on the already-committed state
  // is legitimate (and is exactly what a stale-settlement attacker does).
  EscrowResult request_settlement(const Checkpoint& cp, Tick now);
  // Replays the transcript from the latest checkpoint baseline, verifying
  // signatures and hash pointers itself; a strictly newer endpoint replaces
  // the pending outcome and resets the deadline.
  EscrowResult dispute(std::span<const SignedInvoice> transcript, Tick now);
  EscrowResult finalize(Tick now);

  std::pair<EscrowResult, std::string> htlc_lock(const Address& payer,
                                                 const Address& payee,
                                                 std::uint64_t amount,
                                                 const Hash256& hash_lock,
                                                 Tick timeout, Tick now);
  // Preimage is checked before expiry, so a late wrong preimage reports
  // WrongPreimage, not Expired.
  EscrowResult htlc_claim(const std::string& lock_id, ByteSpan preimage,
                          Tick now);
  EscrowResult htlc_refund(const std::string& lock_id, Tick now);

  const ChannelConfig& config() const { return config_; }
  Phase phase() const { return phase_; }
  const std::optional<Checkpoint>& latest_checkpoint() const {
    return latest_;
  }
  std::uint64_t pending_sequence() const;  // valid while Pending
  Tick challenge_deadline() const;         // valid while Pending
  std::uint64_t final_sequence() const { return final_sequence_; }

  // Base balances (pending else latest checkpoint else deposits) plus HTLC
  // claim adjustments; available subtracts open locks.
  std::map<Address, std::uint64_t> view_balances() const;
  std::uint64_t available(const Address& party) const;
  std::uint64_t locked_total() const;
  const std::map<std::string, Htlc>& htlcs() const { return htlcs_; }
  const std::map<Address, std::uint64_t>& payouts() const;  // after finalize

 private:
  struct PendingSettlement {
    std::map<Address, std::uint64_t> balances;
    std::uint64_t sequence = 0;
    Hash256 chain_head;
    Tick deadline = 0;
  };

  EscrowResult validate_checkpoint(const Checkpoint& cp) const;
  std::map<Address, std::uint64_t> base_balances() const;
  std::uint64_t open_locks(const Address& party) const;
  std::int64_t adjustment(const Address& party) const;
  void assert_conservation() const;

  ChannelConfig config_;
  ChallengeParams params_;
  std::optional<Checkpoint> latest_;
  Phase phase_ = Phase::None;
  PendingSettlement pending_;
  std::map<Address, std::uint64_t> payouts_;
  std::uint64_t final_sequence_ = 0;
  std::map<std::string, Htlc> htlcs_;
  std::map<Address, std::int64_t> adjustments_;  // settled HTLC transfers
  std::uint64_t next_lock_ = 1;
};

// Deployment front desk: one contract per channel name.
class EscrowRegistry {
 public:
  EscrowContract& deploy(const ChannelConfig& config, ChallengeParams params);
  EscrowContract& at(const std::string& channel);
  const EscrowContract& at(const std::string& channel) const;
  bool contains(const std::string& channel) const;

 private:
  std::map<std::string, EscrowContract> contracts_;
};

}  // namespace parsec
