// Compares the parallel paths against their serial references on
// synthetic workloads and checks they produce identical results.

#include <chrono>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "parsec/chain.hpp"
#include "parsec/simulator.hpp"

using namespace parsec;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<SignedInvoice> build_chain(std::size_t length,
                                       const KeyPair& buyer,
                                       const KeyPair& seller) {
  Rng id_rng(7);
  std::vector<SignedInvoice> chain;
  chain.reserve(length);
  Invoice inv;
  inv.invoice_address = derive_address(seller.public_key, Currency::ETH);
  inv.price = 1;
  inv.currency = Currency::ETH;
  inv.invoice_type = "bench";
  for (std::size_t i = 0; i < length; ++i) {
    const SignedInvoice* pred = chain.empty() ? nullptr : &chain.back();
    chain.push_back(make_signed_invoice(inv, pred, "bench", i + 1, buyer,
                                        seller, id_rng));
  }
  return chain;
}

Scenario build_scenario(std::uint32_t channels, std::uint32_t payments) {
  std::ostringstream text;
  text << "parsec-scenario v1\n";
  text << "seed 11\n";
  text << "partitions 4\n";
  text << "fault dup 1/5 reorder 3\n";
  for (std::uint32_t c = 0; c < channels; ++c)
    text << "party p" << c << "a ETH\nparty p" << c << "b ETH\n";
  for (std::uint32_t c = 0; c < channels; ++c)
    text << "channel ch" << c << " p" << c << "a p" << c
         << "b deposit 1000000 1000000 n 8 m 25 timeout 40\n";
  for (std::uint32_t c = 0; c < channels; ++c)
    for (std::uint32_t p = 0; p < payments; ++p) {
      const char* payer = p % 2 ? "b" : "a";
      const char* payee = p % 2 ? "a" : "b";
      text << p << " pay ch" << c << " p" << c << payer << " p" << c << payee
           << " " << (p % 7 + 1) << "\n";
    }
  std::istringstream in(text.str());
  return Scenario::parse(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parsec benchmarks: parallel kernels vs serial references"};
  std::size_t chain_length = 20000;
  std::uint32_t channels = 8, payments = 400;
  app.add_option("--chain-length", chain_length, "verify bench chain length");
  app.add_option("--channels", channels, "scenario bench channel count");
  app.add_option("--payments", payments, "payments per channel");
  CLI11_PARSE(app, argc, argv);

  const KeyPair buyer = KeyPair::from_seed(digest(str_bytes("bench.a")).span());
  const KeyPair seller =
      KeyPair::from_seed(digest(str_bytes("bench.b")).span());

  std::cout << "chain verification, " << chain_length << " transactions\n";
  const std::vector<SignedInvoice> chain =
      build_chain(chain_length, buyer, seller);
  auto t0 = Clock::now();
  const auto serial_fault = verify_chain_serial(chain);
  const double serial_verify = seconds_since(t0);
  t0 = Clock::now();
  const auto parallel_fault = verify_chain(chain);
  const double parallel_verify = seconds_since(t0);
  if (serial_fault.has_value() != parallel_fault.has_value()) {
    std::cerr << "MISMATCH: serial and parallel verification disagree\n";
    return 1;
  }
  std::cout << "  serial   " << serial_verify << " s\n";
  std::cout << "  parallel " << parallel_verify << " s (speedup "
            << serial_verify / parallel_verify << "x)\n";

  std::cout << "node ingest, " << chain_length << " transactions\n";
  ChannelConfig config;
  config.channel = "bench";
  config.party_a = derive_address(buyer.public_key, Currency::ETH);
  config.party_b = derive_address(seller.public_key, Currency::ETH);
  config.pubkey_a = buyer.public_key;
  config.pubkey_b = seller.public_key;
  config.deposit_a = chain_length + 1;
  config.deposit_b = 0;
  config.n = 1;
  config.m = chain_length + 1;  // no checkpoint traffic during the bench
  ChannelNode one_by_one(config, buyer.private_key, seller.private_key);
  t0 = Clock::now();
  for (const SignedInvoice& si : chain)
    if (one_by_one.ingest(si, 0).status != IngestStatus::Applied) {
      std::cerr << "MISMATCH: serial ingest rejected a valid transaction\n";
      return 1;
    }
  const double serial_ingest = seconds_since(t0);
  ChannelNode batched(config, buyer.private_key, seller.private_key);
  t0 = Clock::now();
  batched.ingest_batch(chain, 0);
  const double batch_ingest = seconds_since(t0);
  if (batched.chain_head() != one_by_one.chain_head() ||
      batched.balances() != one_by_one.balances()) {
    std::cerr << "MISMATCH: batch ingest diverged from serial ingest\n";
    return 1;
  }
  std::cout << "  serial   " << serial_ingest << " s\n";
  std::cout << "  batched  " << batch_ingest << " s (speedup "
            << serial_ingest / batch_ingest << "x)\n";

  std::cout << "scenario, " << channels << " channels x " << payments
            << " payments\n";
  const Scenario s = build_scenario(channels, payments);
  t0 = Clock::now();
  const SimReport serial_report = run_scenario(s, SimMode::Serial);
  const double serial_run = seconds_since(t0);
  t0 = Clock::now();
  const SimReport parallel_report = run_scenario(s, SimMode::Parallel);
  const double parallel_run = seconds_since(t0);
  if (serial_report.render(ReportFormat::Kv) !=
      parallel_report.render(ReportFormat::Kv)) {
    std::cerr << "MISMATCH: parallel scenario report differs from serial\n";
    return 1;
  }
  std::cout << "  serial   " << serial_run << " s\n";
  std::cout << "  parallel " << parallel_run << " s (speedup "
            << serial_run / parallel_run << "x)\n";
  return 0;
}
