#include "parsec/escrow.hpp"

#include <algorithm>

namespace parsec {

std::string_view htlc_status_name(HtlcStatus s) {
  switch (s) {
    case HtlcStatus::OPEN: return "OPEN";
    case HtlcStatus::CLAIMED: return "CLAIMED";
    case HtlcStatus::REFUNDED: return "REFUNDED";
  }
  return "?";
}

std::string_view escrow_status_name(EscrowStatus s) {
  switch (s) {
    case EscrowStatus::Ok: return "Ok";
    case EscrowStatus::StaleCheckpoint: return "StaleCheckpoint";
    case EscrowStatus::BadSignature: return "BadSignature";
    case EscrowStatus::WrongChannel: return "WrongChannel";
    case EscrowStatus::ConservationViolation: return "ConservationViolation";
    case EscrowStatus::AlreadyFinalized: return "AlreadyFinalized";
    case EscrowStatus::NothingPending: return "NothingPending";
    case EscrowStatus::ChallengeWindowClosed: return "ChallengeWindowClosed";
    case EscrowStatus::InvalidTranscript: return "InvalidTranscript";
    case EscrowStatus::NotNewer: return "NotNewer";
    case EscrowStatus::ChallengeStillOpen: return "ChallengeStillOpen";
    case EscrowStatus::InsufficientFunds: return "InsufficientFunds";
    case EscrowStatus::BadTimeout: return "BadTimeout";
    case EscrowStatus::InvalidAmount: return "InvalidAmount";
    case EscrowStatus::UnknownParty: return "UnknownParty";
    case EscrowStatus::UnknownLock: return "UnknownLock";
    case EscrowStatus::WrongPreimage: return "WrongPreimage";
    case EscrowStatus::Expired: return "Expired";
    case EscrowStatus::NotYetExpired: return "NotYetExpired";
    case EscrowStatus::NotOpen: return "NotOpen";
  }
  return "?";
}

void ChallengeParams::validate() const {
  if (challenge_period == 0)
    throw ConfigError("challenge period must be positive");
}

EscrowContract::EscrowContract(ChannelConfig config, ChallengeParams params)
    : config_(std::move(config)), params_(params) {
  config_.validate();
  params_.validate();
  adjustments_[config_.party_a] = 0;
  adjustments_[config_.party_b] = 0;
}

std::map<Address, std::uint64_t> EscrowContract::base_balances() const {
  if (phase_ == Phase::Pending) return pending_.balances;
  if (latest_) return latest_->balances;
  return {{config_.party_a, config_.deposit_a},
          {config_.party_b, config_.deposit_b}};
}

std::uint64_t EscrowContract::open_locks(const Address& party) const {
  std::uint64_t sum = 0;
  for (const auto& [id, h] : htlcs_)
    if (h.status == HtlcStatus::OPEN && h.payer == party) sum += h.amount;
  return sum;
}

std::int64_t EscrowContract::adjustment(const Address& party) const {
  const auto it = adjustments_.find(party);
  return it == adjustments_.end() ? 0 : it->second;
}

std::map<Address, std::uint64_t> EscrowContract::view_balances() const {
  std::map<Address, std::uint64_t> out;
  for (const auto& [addr, base] : base_balances()) {
    const std::int64_t v = static_cast<std::int64_t>(base) + adjustment(addr);
    if (v < 0) throw std::logic_error("escrow balance went negative");
    out[addr] = static_cast<std::uint64_t>(v);
  }
  return out;
}

std::uint64_t EscrowContract::available(const Address& party) const {
  const auto view = view_balances();
  const auto it = view.find(party);
  if (it == view.end()) return 0;
  const std::uint64_t locked = open_locks(party);
  return it->second >= locked ? it->second - locked : 0;
}

std::uint64_t EscrowContract::locked_total() const {
  std::uint64_t sum = 0;
  for (const auto& [id, h] : htlcs_)
    if (h.status == HtlcStatus::OPEN) sum += h.amount;
  return sum;
}

const std::map<Address, std::uint64_t>& EscrowContract::payouts() const {
  if (phase_ != Phase::Finalized)
    throw ConfigError("no payouts before finalization");
  return payouts_;
}

std::uint64_t EscrowContract::pending_sequence() const {
  if (phase_ != Phase::Pending) throw ConfigError("no pending settlement");
  return pending_.sequence;
}

Tick EscrowContract::challenge_deadline() const {
  if (phase_ != Phase::Pending) throw ConfigError("no pending settlement");
  return pending_.deadline;
}

void EscrowContract::assert_conservation() const {
  unsigned __int128 total = 0;
  if (phase_ == Phase::Finalized) {
    for (const auto& [addr, amount] : payouts_) total += amount;
  } else {
    const auto view = view_balances();
    for (const auto& [addr, amount] : view) total += amount;
    for (const Address& p : {config_.party_a, config_.party_b})
      if (view.at(p) < open_locks(p))
        throw std::logic_error("open locks exceed a party's balance");
  }
  if (total != config_.total_deposits())
    throw std::logic_error("escrow conservation violated");
}

EscrowResult EscrowContract::validate_checkpoint(const Checkpoint& cp) const {
  if (cp.channel != config_.channel)
    return {EscrowStatus::WrongChannel, "checkpoint for " + cp.channel};
  if (!checkpoint_signatures_ok(cp, config_.pubkey_a, config_.pubkey_b))
    return {EscrowStatus::BadSignature, "checkpoint signature invalid"};
  if (cp.balances.size() != 2 || !cp.balances.contains(config_.party_a) ||
      !cp.balances.contains(config_.party_b))
    return {EscrowStatus::ConservationViolation,
            "checkpoint must carry exactly the two party balances"};
  unsigned __int128 sum = 0;
  for (const auto& [addr, amount] : cp.balances) sum += amount;
  if (sum != config_.total_deposits())
    return {EscrowStatus::ConservationViolation,
            "checkpoint balances do not sum to the deposits"};
  for (const Address& p : {config_.party_a, config_.party_b}) {
    const std::int64_t v =
        static_cast<std::int64_t>(cp.balances.at(p)) + adjustment(p);
    if (v < 0 || static_cast<std::uint64_t>(v) < open_locks(p))
      return {EscrowStatus::ConservationViolation,
              "checkpoint balances do not cover open locks"};
  }
  return {};
}

EscrowResult EscrowContract::submit_checkpoint(const Checkpoint& cp, Tick) {
  if (phase_ == Phase::Finalized)
    return {EscrowStatus::AlreadyFinalized, "channel already settled"};
  if (auto r = validate_checkpoint(cp); !r.ok()) return r;
  if (latest_ && cp.sequence <= latest_->sequence)
    return {EscrowStatus::StaleCheckpoint,
            "sequence " + std::to_string(cp.sequence) + " not above " +
                std::to_string(latest_->sequence)};
  latest_ = cp;
  assert_conservation();
  return {};
}

EscrowResult EscrowContract::request_settlement(const Checkpoint& cp,
                                                Tick now) {
  if (phase_ == Phase::Finalized)
    return {EscrowStatus::AlreadyFinalized, "channel already settled"};
  if (auto r = validate_checkpoint(cp); !r.ok()) return r;
  if (latest_ && cp.sequence < latest_->sequence)
    return {EscrowStatus::StaleCheckpoint,
            "sequence " + std::to_string(cp.sequence) + " below committed " +
                std::to_string(latest_->sequence)};
  if (phase_ == Phase::Pending && cp.sequence <= pending_.sequence)
    return {EscrowStatus::NotNewer,
            "pending settlement already at sequence " +
                std::to_string(pending_.sequence)};
  pending_.balances = cp.balances;
  pending_.sequence = cp.sequence;
  pending_.chain_head = cp.chain_head;
  pending_.deadline = now + params_.challenge_period;
  phase_ = Phase::Pending;
  if (!latest_ || cp.sequence > latest_->sequence) latest_ = cp;
  assert_conservation();
  return {};
}

EscrowResult EscrowContract::dispute(std::span<const SignedInvoice> transcript,
                                     Tick now) {
  if (phase_ == Phase::Finalized)
    return {EscrowStatus::AlreadyFinalized, "channel already settled"};
  if (phase_ != Phase::Pending)
    return {EscrowStatus::NothingPending, "no settlement to dispute"};
  if (now > pending_.deadline)
    return {EscrowStatus::ChallengeWindowClosed,
            "deadline " + std::to_string(pending_.deadline) + " passed"};

  // Replay from the latest committed checkpoint; the contract trusts only
  // what it verified itself.
  std::map<Address, std::uint64_t> balances;
  std::uint64_t seq = 0;
  Hash256 head = Hash256::ZERO;
  if (latest_) {
    balances = latest_->balances;
    seq = latest_->sequence;
    head = latest_->chain_head;
  } else {
    balances = {{config_.party_a, config_.deposit_a},
                {config_.party_b, config_.deposit_b}};
  }

  const Roster roster = config_.roster();
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    const SignedInvoice& si = transcript[i];
    const auto fail = [&](const std::string& what) {
      return EscrowResult{EscrowStatus::InvalidTranscript,
                          "index " + std::to_string(i) + ": " + what,
                          static_cast<std::uint64_t>(i)};
    };
    if (si.sequence != seq + 1)
      return fail("expected sequence " + std::to_string(seq + 1));
    if (si.hash_pointer_to_previous.transaction_hash != head)
      return fail("hash pointer does not extend the settled head");
    if (i > 0 && si.hash_pointer_to_previous.transaction_id !=
                     transcript[i - 1].invoice_id)
      return fail("pointer id does not match predecessor");
    const auto violations = verify_signed_invoice(si, config_.currency,
                                                  &roster);
    if (!violations.empty()) return fail(violations.front().detail);
    if (balances.at(si.buyer_address) < si.price)
      return fail("transfer overdraws the buyer balance");
    balances.at(si.buyer_address) -= si.price;
    balances.at(si.supplier_address) += si.price;
    seq = si.sequence;
    head = storage_hash(si);
  }

  if (seq <= pending_.sequence)
    return {EscrowStatus::NotNewer,
            "replayed sequence " + std::to_string(seq) + " does not exceed " +
                std::to_string(pending_.sequence)};
  pending_.balances = std::move(balances);
  pending_.sequence = seq;
  pending_.chain_head = head;
  pending_.deadline = now + params_.challenge_period;
  assert_conservation();
  return {};
}

EscrowResult EscrowContract::finalize(Tick now) {
  if (phase_ == Phase::Finalized)
    return {EscrowStatus::AlreadyFinalized, "channel already settled"};
  if (phase_ != Phase::Pending)
    return {EscrowStatus::NothingPending, "no settlement to finalize"};
  if (now <= pending_.deadline)
    return {EscrowStatus::ChallengeStillOpen,
            "challenge window open until " +
                std::to_string(pending_.deadline)};
  for (auto& [id, h] : htlcs_)
    if (h.status == HtlcStatus::OPEN) h.status = HtlcStatus::REFUNDED;
  payouts_.clear();
  for (const auto& [addr, base] : pending_.balances)
    payouts_[addr] =
        static_cast<std::uint64_t>(static_cast<std::int64_t>(base) +
                                   adjustment(addr));
  final_sequence_ = pending_.sequence;
  phase_ = Phase::Finalized;
  assert_conservation();
  return {};
}

std::pair<EscrowResult, std::string> EscrowContract::htlc_lock(
    const Address& payer, const Address& payee, std::uint64_t amount,
    const Hash256& hash_lock, Tick timeout, Tick now) {
  if (phase_ == Phase::Finalized)
    return {{EscrowStatus::AlreadyFinalized, "channel already settled"}, {}};
  const bool payer_known = payer == config_.party_a || payer == config_.party_b;
  const bool payee_known = payee == config_.party_a || payee == config_.party_b;
  if (!payer_known || !payee_known || payer == payee)
    return {{EscrowStatus::UnknownParty,
             "lock parties must be the two channel parties"},
            {}};
  if (amount == 0)
    return {{EscrowStatus::InvalidAmount, "lock amount must be positive"}, {}};
  if (timeout <= now)
    return {{EscrowStatus::BadTimeout, "timeout must lie in the future"}, {}};
  if (available(payer) < amount)
    return {{EscrowStatus::InsufficientFunds,
             "available balance below lock amount"},
            {}};
  Htlc h;
  h.lock_id = "lock-" + std::to_string(next_lock_++);
  h.amount = amount;
  h.hash_lock = hash_lock;
  h.timeout = timeout;
  h.payer = payer;
  h.payee = payee;
  htlcs_[h.lock_id] = h;
  assert_conservation();
  return {{}, h.lock_id};
}

EscrowResult EscrowContract::htlc_claim(const std::string& lock_id,
                                        ByteSpan preimage, Tick now) {
  const auto it = htlcs_.find(lock_id);
  if (it == htlcs_.end())
    return {EscrowStatus::UnknownLock, "no such lock " + lock_id};
  Htlc& h = it->second;
  if (h.status != HtlcStatus::OPEN)
    return {EscrowStatus::NotOpen,
            std::string("lock already ") + std::string(htlc_status_name(h.status))};
  if (digest(preimage) != h.hash_lock)
    return {EscrowStatus::WrongPreimage, "preimage does not match the lock"};
  if (now > h.timeout)
    return {EscrowStatus::Expired,
            "lock expired at tick " + std::to_string(h.timeout)};
  h.status = HtlcStatus::CLAIMED;
  adjustments_[h.payer] -= static_cast<std::int64_t>(h.amount);
  adjustments_[h.payee] += static_cast<std::int64_t>(h.amount);
  assert_conservation();
  return {};
}

EscrowResult EscrowContract::htlc_refund(const std::string& lock_id,
                                         Tick now) {
  const auto it = htlcs_.find(lock_id);
  if (it == htlcs_.end())
    return {EscrowStatus::UnknownLock, "no such lock " + lock_id};
  Htlc& h = it->second;
  if (h.status != HtlcStatus::OPEN)
    return {EscrowStatus::NotOpen,
            std::string("lock already ") + std::string(htlc_status_name(h.status))};
  if (now <= h.timeout)
    return {EscrowStatus::NotYetExpired,
            "lock live until tick " + std::to_string(h.timeout)};
  h.status = HtlcStatus::REFUNDED;
  assert_conservation();
  return {};
}

EscrowContract& EscrowRegistry::deploy(const ChannelConfig& config,
                                       ChallengeParams params) {
  if (contracts_.contains(config.channel))
    throw ConfigError("contract already deployed for " + config.channel);
  const auto [it, inserted] =
      contracts_.emplace(config.channel, EscrowContract(config, params));
  return it->second;
}

EscrowContract& EscrowRegistry::at(const std::string& channel) {
  const auto it = contracts_.find(channel);
  if (it == contracts_.end())
    throw ConfigError("no contract deployed for " + channel);
  return it->second;
}

const EscrowContract& EscrowRegistry::at(const std::string& channel) const {
  const auto it = contracts_.find(channel);
  if (it == contracts_.end())
    throw ConfigError("no contract deployed for " + channel);
  return it->second;
}

bool EscrowRegistry::contains(const std::string& channel) const {
  return contracts_.contains(channel);
}

}  // namespace parsec
