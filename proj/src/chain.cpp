#include "parsec/chain.hpp"

#include <algorithm>

namespace parsec {

namespace {

// Faults of element i that only depend on element i-1 and the position.
void structural_faults(std::span<const SignedInvoice> txs, std::size_t i,
                       std::vector<ChainFault>& out) {
  const SignedInvoice& si = txs[i];
  const std::uint64_t pos = i + 1;
  if (si.sequence != pos)
    out.push_back({pos,
                   {ViolationKind::SequenceMismatch,
                    "sequence " + std::to_string(si.sequence) + " at position " +
                        std::to_string(pos)}});
  if (i == 0) {
    if (!si.hash_pointer_to_previous.is_genesis())
      out.push_back({pos,
                     {ViolationKind::GenesisMismatch,
                      "first transaction must carry the genesis pointer"}});
  } else {
    if (si.hash_pointer_to_previous.transaction_hash != storage_hash(txs[i - 1]))
      out.push_back({pos,
                     {ViolationKind::HashPointerMismatch,
                      "hash pointer does not match predecessor"}});
    if (si.hash_pointer_to_previous.transaction_id != txs[i - 1].invoice_id)
      out.push_back({pos,
                     {ViolationKind::PredecessorIdMismatch,
                      "pointer id does not match predecessor invoice id"}});
  }
}

}  // namespace

std::optional<ChainFault> verify_chain_serial(
    std::span<const SignedInvoice> txs, std::optional<Currency> expected,
    const Roster* roster) {
  if (txs.empty())
    return ChainFault{0, {ViolationKind::EmptyChain, "chain is empty"}};
  const Currency currency = expected.value_or(txs.front().currency);
  for (std::size_t i = 0; i < txs.size(); ++i) {
    std::vector<ChainFault> faults;
    structural_faults(txs, i, faults);
    if (!faults.empty()) return faults.front();
    const auto violations = verify_signed_invoice(txs[i], currency, roster);
    if (!violations.empty()) return ChainFault{i + 1, violations.front()};
  }
  return std::nullopt;
}

std::optional<ChainFault> verify_chain(std::span<const SignedInvoice> txs,
                                       std::optional<Currency> expected,
                                       const Roster* roster) {
  if (txs.empty())
    return ChainFault{0, {ViolationKind::EmptyChain, "chain is empty"}};
  const Currency currency = expected.value_or(txs.front().currency);
  const std::int64_t n = static_cast<std::int64_t>(txs.size());

  // Per-element verdicts computed independently, then reduced to the first
  // failing position so the result matches the serial reference exactly.
  std::vector<std::vector<ChainFault>> faults(txs.size());

#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    structural_faults(txs, static_cast<std::size_t>(i), faults[i]);
    if (!faults[i].empty()) continue;  // match serial short-circuit order
    for (const auto& v : verify_signed_invoice(txs[i], currency, roster)) {
      faults[i].push_back({static_cast<std::uint64_t>(i) + 1, v});
      break;
    }
  }

  for (std::int64_t i = 0; i < n; ++i)
    if (!faults[i].empty()) return faults[i].front();
  return std::nullopt;
}

std::vector<ChainFault> chain_report(std::span<const SignedInvoice> txs,
                                     std::optional<Currency> expected,
                                     const Roster* roster) {
  std::vector<ChainFault> out;
  if (txs.empty()) {
    out.push_back({0, {ViolationKind::EmptyChain, "chain is empty"}});
    return out;
  }
  const Currency currency = expected.value_or(txs.front().currency);
  const std::int64_t n = static_cast<std::int64_t>(txs.size());
  std::vector<std::vector<ChainFault>> faults(txs.size());

#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    structural_faults(txs, static_cast<std::size_t>(i), faults[i]);
    for (const auto& v : verify_signed_invoice(txs[i], currency, roster))
      faults[i].push_back({static_cast<std::uint64_t>(i) + 1, v});
  }

  for (auto& f : faults) out.insert(out.end(), f.begin(), f.end());
  return out;
}

}  // namespace parsec
