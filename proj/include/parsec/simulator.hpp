#pragma once

// Scenario driver. Execution runs in three phases:
//   A (serial): derive keys, build each channel's true transaction chain,
//     append every record to the log, and precompute per-tick availability.
//   B (per channel): replay the log through a faulted stream into the node
//     and contract on a shared logical clock. Channels are independent, so
//     this phase may run them on parallel tasks.
//   C (serial): assemble the report in channel declaration order.
// Phase B touches only immutable shared state (the log), so the parallel
// mode is byte-identical to the serial one; the report carries no trace of
// which mode produced it.
//
// Intra-tick order: transaction delivery and ingest, node tick (timeout
// checkpoints), control delivery, queued contract calls, direct contract
// actions (HTLC ops, stale settlements). At scenario end every channel is
// auto-settled: an unscheduled settlement request followed by finalize once
// the challenge window lapses.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parsec/escrow.hpp"
#include "parsec/event_log.hpp"
#include "parsec/node.hpp"
#include "parsec/oracle.hpp"
#include "parsec/scenario.hpp"

namespace parsec {

enum class SimMode { Serial, Parallel };
enum class ReportFormat { Text, Kv };
std::optional<ReportFormat> parse_report_format(std::string_view name);

struct CheckpointEntry {
  CheckpointReason reason = CheckpointReason::MODULO;
  std::uint64_t sequence = 0;
  Tick tick = 0;
  EscrowStatus submit_status = EscrowStatus::Ok;
};

struct HtlcEntry {
  std::string name;     // scenario lock name
  std::string lock_id;  // contract id, "-" if the lock was never placed
  HtlcStatus status = HtlcStatus::OPEN;
};

struct ChannelReport {
  std::string channel;

  std::map<Address, std::uint64_t> node_balances;
  std::map<Address, std::uint64_t> oracle_balances;
  std::map<Address, std::uint64_t> payouts;
  Hash256 node_head;
  Hash256 oracle_head;
  std::uint64_t node_next_sequence = 1;
  std::uint64_t oracle_final_sequence = 0;
  std::uint64_t settled_sequence = 0;

  std::vector<CheckpointEntry> checkpoints;
  std::vector<std::string> events;  // settlement requests, disputes, htlc ops
  std::vector<HtlcEntry> htlc_final;

  DeliveryStats delivery;
  std::uint64_t applied = 0;
  std::uint64_t duplicates_ignored = 0;
  std::uint64_t held = 0;
  std::uint64_t rejected = 0;

  std::vector<std::string> divergence;
};

struct SimReport {
  std::uint64_t seed = 0;
  std::vector<ChannelReport> channels;

  bool diverged() const;
  std::string render(ReportFormat format) const;
};

SimReport run_scenario(const Scenario& s, SimMode mode = SimMode::Serial);

// Deterministic key material: every party's keypair is a function of the
// scenario seed and the party name.
KeyPair party_keys(std::uint64_t seed, const std::string& name);
std::uint64_t derived_seed(std::uint64_t seed, std::string_view domain,
                           const std::string& name);

}  // namespace parsec
