#include "parsec/oracle.hpp"

#include "parsec/chain.hpp"

namespace parsec {

OracleResult oracle_replay(std::span<const SignedInvoice> chain,
                           const ChannelConfig& config) {
  OracleResult out;
  out.balances[config.party_a] = config.deposit_a;
  out.balances[config.party_b] = config.deposit_b;
  out.chain_head = Hash256::ZERO;
  if (chain.empty()) return out;

  const Roster roster = config.roster();
  if (const auto fault = verify_chain_serial(chain, config.currency, &roster))
    throw InvalidChain("invalid chain at position " +
                       std::to_string(fault->position) + ": " +
                       fault->violation.detail);

  for (const SignedInvoice& si : chain) {
    auto buyer = out.balances.find(si.buyer_address);
    auto seller = out.balances.find(si.supplier_address);
    if (buyer == out.balances.end() || seller == out.balances.end())
      throw InvalidChain("transaction party outside the channel");
    if (buyer->second < si.price)
      throw InvalidChain("overdraft at sequence " +
                         std::to_string(si.sequence));
    buyer->second -= si.price;
    seller->second += si.price;
    out.chain_head = storage_hash(si);
    out.final_sequence = si.sequence;
  }
  return out;
}

}  // namespace parsec
