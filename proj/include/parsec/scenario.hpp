#pragma once

// Scenario files: line-oriented, versioned header "parsec-scenario v1".
// Declarations first (seed, faults, parties, channels), then one action per
// line as "<tick> <verb> <args...>". '#' starts a comment. The relay verb is
// sugar: it expands into the four-step two-hop HTLC choreography at parse
// time, after validating the timeout stagger.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "parsec/escrow.hpp"
#include "parsec/event_log.hpp"
#include "parsec/node.hpp"

namespace parsec {

class ScenarioError : public ParsecError {
 public:
  using ParsecError::ParsecError;
};

struct PartyDecl {
  std::string name;
  Currency currency = Currency::ETH;
};

struct ChannelDecl {
  std::string name;
  std::string party_a;
  std::string party_b;
  std::uint64_t deposit_a = 0;
  std::uint64_t deposit_b = 0;
  std::uint32_t n = 1;
  std::uint64_t m = 1;
  Tick checkpoint_timeout = 0;
};

struct Action {
  enum class Verb {
    Pay,         // buyer pays supplier over the channel chain
    Control,     // control-topic request (unscheduled / disputed)
    HtlcLock,
    HtlcClaim,
    HtlcRefund,
    SettleStale, // contract call with its current latest checkpoint
  };
  Tick tick = 0;
  Verb verb = Verb::Pay;
  std::string channel;

  std::string buyer;               // Pay
  std::string supplier;            // Pay
  std::uint64_t amount = 0;        // Pay, HtlcLock

  ControlKind control_kind = ControlKind::UNSCHEDULED_SETTLEMENT;  // Control
  std::string requester;           // Control, SettleStale

  std::string payer;               // HtlcLock
  std::string payee;               // HtlcLock
  std::string lock_name;           // Htlc*
  std::string preimage;            // HtlcLock (defines hash), HtlcClaim
  Tick htlc_timeout = 0;           // HtlcLock, absolute tick
};

struct Scenario {
  std::uint64_t seed = 0;
  Tick challenge_period = 100;
  FaultProfile fault;              // seed is filled in by the simulator
  std::uint32_t partitions = 1;
  std::vector<PartyDecl> parties;
  std::vector<ChannelDecl> channels;
  std::vector<Action> actions;     // sorted by tick, declaration order kept
  Tick horizon = 0;                // last simulated tick

  const PartyDecl& party(const std::string& name) const;
  const ChannelDecl& channel(const std::string& name) const;
  void validate() const;           // throws ScenarioError

  static Scenario parse(std::istream& in);
  static Scenario parse_file(const std::filesystem::path& path);
};

}  // namespace parsec
