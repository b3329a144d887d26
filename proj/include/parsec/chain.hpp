#pragma once

// Chain verification: genesis at position 1, dense sequence numbers, each
// element's hash pointer matching the digest of its predecessor's storage
// bytes, and every element passing verify_signed_invoice.
//
// verify_chain() is the OpenMP kernel (per-element checks and storage
// hashes run data-parallel, the linkage scan stays serial);
// verify_chain_serial() is the reference implementation kept for tests and
// the benchmark. Both report the same first fault.

#include <span>

#include "parsec/protocol.hpp"

namespace parsec {

struct ChainFault {
  std::uint64_t position = 0;  // 1-based; equals the expected sequence number
  Violation violation;
};

std::optional<ChainFault> verify_chain(
    std::span<const SignedInvoice> transactions,
    std::optional<Currency> expected_currency = std::nullopt,
    const Roster* roster = nullptr);

std::optional<ChainFault> verify_chain_serial(
    std::span<const SignedInvoice> transactions,
    std::optional<Currency> expected_currency = std::nullopt,
    const Roster* roster = nullptr);

// Every fault in the chain, in position order; the CLI report uses this.
std::vector<ChainFault> chain_report(
    std::span<const SignedInvoice> transactions,
    std::optional<Currency> expected_currency = std::nullopt,
    const Roster* roster = nullptr);

}  // namespace parsec
