#pragma once

// Ground-truth replay: a single in-order fold over a verified chain, with no
// buffering, dedup, or checkpoint logic. Kept deliberately small and written
// against the wire rules only, so the channel node has something independent
// to be compared with.

#include <map>
#include <span>

#include "parsec/node.hpp"
#include "parsec/protocol.hpp"

namespace parsec {

struct OracleResult {
  std::map<Address, std::uint64_t> balances;
  Hash256 chain_head;
  std::uint64_t final_sequence = 0;
};

class InvalidChain : public ParsecError {
 public:
  using ParsecError::ParsecError;
};

OracleResult oracle_replay(std::span<const SignedInvoice> chain,
                           const ChannelConfig& config);

}  // namespace parsec
