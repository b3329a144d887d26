#include <algorithm>
#include <array>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "doctest.h"
#include "parsec/node.hpp"
#include "parsec/oracle.hpp"
#include "parsec/plog.hpp"
#include "support.hpp"

using namespace parsec;
using parsec::test::Channel;

namespace {

ChannelNode fresh_node(const Channel& ch) {
  return ChannelNode(ch.config, ch.a.private_key, ch.b.private_key);
}

std::vector<NodeOutput> ingest_all(ChannelNode& node,
                                   std::span<const SignedInvoice> txs,
                                   Tick now = 0) {
  std::vector<NodeOutput> outputs;
  for (const SignedInvoice& si : txs) {
    IngestResult r = node.ingest(si, now);
    for (auto& out : r.outputs) outputs.push_back(std::move(out));
  }
  return outputs;
}

}  // namespace

TEST_CASE("in-order ingestion matches the replay oracle") {
  const Channel ch;
  const auto chain = ch.build_chain(30);
  ChannelNode node = fresh_node(ch);
  for (const SignedInvoice& si : chain)
    CHECK(node.ingest(si, 0).status == IngestStatus::Applied);

  const OracleResult oracle = oracle_replay(chain, ch.config);
  CHECK(node.balances() == oracle.balances);
  CHECK(node.chain_head() == oracle.chain_head);
  CHECK(node.next_sequence() == oracle.final_sequence + 1);
}

TEST_CASE("the reorder buffer holds and releases out-of-order arrivals") {
  const Channel ch;
  const auto chain = ch.build_chain(3);
  ChannelNode node = fresh_node(ch);

  CHECK(node.ingest(chain[2], 0).status == IngestStatus::Held);
  CHECK(node.ingest(chain[0], 0).status == IngestStatus::Applied);
  CHECK(node.pending_size() == 1);

  // Applying 2 drains the buffered 3 in the same call.
  const IngestResult r = node.ingest(chain[1], 0);
  CHECK(r.status == IngestStatus::Applied);
  CHECK(r.applied_count == 2);
  CHECK(node.pending_size() == 0);
  CHECK(node.next_sequence() == 4);
  CHECK(node.balances() == oracle_replay(chain, ch.config).balances);
}

TEST_CASE("every arrival permutation within the window converges") {
  // Five transactions against n = 4: the worst displacement still fits the
  // window, so all 120 permutations must yield the oracle state.
  const Channel ch;
  const auto chain = ch.build_chain(5);
  const OracleResult oracle = oracle_replay(chain, ch.config);

  std::array<std::size_t, 5> order{0, 1, 2, 3, 4};
  int permutations = 0;
  do {
    ++permutations;
    ChannelNode node = fresh_node(ch);
    for (std::size_t i : order) {
      const IngestStatus s = node.ingest(chain[i], 0).status;
      CHECK((s == IngestStatus::Applied || s == IngestStatus::Held));
    }
    CHECK(node.balances() == oracle.balances);
    CHECK(node.chain_head() == oracle.chain_head);
    CHECK(node.next_sequence() == 6);
  } while (std::ranges::next_permutation(order).found);
  CHECK(permutations == 120);
}

TEST_CASE("duplicates are ignored wherever they sit") {
  const Channel ch;
  const auto chain = ch.build_chain(4);
  ChannelNode node = fresh_node(ch);

  node.ingest(chain[0], 0);
  CHECK(node.ingest(chain[0], 0).status == IngestStatus::Duplicate);

  node.ingest(chain[2], 0);  // held
  CHECK(node.ingest(chain[2], 0).status == IngestStatus::Duplicate);

  node.ingest(chain[1], 0);  // drains 2
  CHECK(node.ingest(chain[2], 0).status == IngestStatus::Duplicate);
  CHECK(node.ingest(chain[1], 0).status == IngestStatus::Duplicate);
  CHECK(node.next_sequence() == 4);
}

TEST_CASE("arrivals beyond the window are refused, not buffered") {
  const Channel ch;  // n = 4
  const auto chain = ch.build_chain(7);
  ChannelNode node = fresh_node(ch);

  // next = 1, so 6 > 1 + 4 is out of window but 5 is acceptable.
  const IngestResult too_far = node.ingest(chain[5], 0);
  CHECK(too_far.status == IngestStatus::WindowExceeded);
  REQUIRE_FALSE(too_far.violations.empty());
  CHECK(too_far.violations[0].kind == ViolationKind::SequenceMismatch);
  CHECK(node.ingest(chain[4], 0).status == IngestStatus::Held);
  CHECK(node.pending_size() == 1);
}

TEST_CASE("stale and conflicting sequences are rejected as forks") {
  const Channel ch;
  const auto chain = ch.build_chain(3);
  ChannelNode node = fresh_node(ch);
  ingest_all(node, chain);

  // A second, different transaction claiming an applied slot.
  Rng id_rng(99);
  Invoice inv;
  inv.invoice_address = derive_address(ch.b.public_key, Currency::ETH);
  inv.price = 1;
  inv.currency = Currency::ETH;
  const SignedInvoice rival =
      make_signed_invoice(inv, &chain[1], "test", 3, ch.a, ch.b, id_rng);
  const IngestResult r = node.ingest(rival, 0);
  CHECK(r.status == IngestStatus::Rejected);
  REQUIRE_FALSE(r.violations.empty());
  CHECK(r.violations[0].kind == ViolationKind::ForkDetected);

  // Same story for a rival of a held transaction.
  ChannelNode node2 = fresh_node(ch);
  node2.ingest(chain[0], 0);
  const SignedInvoice rival3 =
      make_signed_invoice(inv, &chain[1], "test", 3, ch.a, ch.b, id_rng);
  node2.ingest(chain[2], 0);  // held at slot 3
  const IngestResult r3 = node2.ingest(rival3, 0);
  CHECK(r3.status == IngestStatus::Rejected);
  REQUIRE_FALSE(r3.violations.empty());
  CHECK(r3.violations[0].kind == ViolationKind::ForkDetected);
}

TEST_CASE("invalid transactions are rejected with their violations") {
  const Channel ch;
  const auto chain = ch.build_chain(2);
  ChannelNode node = fresh_node(ch);

  SignedInvoice tampered = chain[0];
  tampered.price += 1;
  const IngestResult r = node.ingest(tampered, 0);
  CHECK(r.status == IngestStatus::Rejected);
  CHECK_FALSE(r.violations.empty());

  SignedInvoice foreign = chain[0];
  foreign.channel = "other";
  CHECK(node.ingest(foreign, 0).status == IngestStatus::Rejected);
}

TEST_CASE("a co-signed overdraft poisons the chain") {
  const Channel ch(10, 10);
  Rng id_rng(5);
  Invoice inv;
  inv.invoice_address = derive_address(ch.b.public_key, Currency::ETH);
  inv.price = 25;  // both parties sign more than alice holds
  inv.currency = Currency::ETH;
  const SignedInvoice overdraft =
      make_signed_invoice(inv, nullptr, "test", 1, ch.a, ch.b, id_rng);

  ChannelNode node = fresh_node(ch);
  const IngestResult r = node.ingest(overdraft, 0);
  CHECK(r.status == IngestStatus::FundsViolation);
  REQUIRE_FALSE(r.violations.empty());
  CHECK(r.violations[0].kind == ViolationKind::InsufficientFunds);
  CHECK(node.poisoned());

  // Everything after the poisoning is refused.
  inv.price = 1;
  const SignedInvoice next =
      make_signed_invoice(inv, nullptr, "test", 1, ch.a, ch.b, id_rng);
  CHECK(node.ingest(next, 0).status == IngestStatus::Poisoned);
  CHECK(node.next_sequence() == 1);  // nothing was applied
}

TEST_CASE("modulo checkpoints fire on exact multiples") {
  Channel ch;

  for (const auto& [m, expected] :
       std::vector<std::pair<std::uint64_t, std::vector<std::uint64_t>>>{
           {1, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}},
           {5, {5, 10}},
           {100, {}}}) {
    ch.config.m = m;
    const auto chain = ch.build_chain(12);
    ChannelNode node(ch.config, ch.a.private_key, ch.b.private_key);
    std::vector<std::uint64_t> seqs;
    for (const NodeOutput& out : ingest_all(node, chain)) {
      REQUIRE(out.kind == NodeOutput::Kind::CHECKPOINT);
      CHECK(out.checkpoint.reason == CheckpointReason::MODULO);
      CHECK(checkpoint_signatures_ok(out.checkpoint, ch.config.pubkey_a,
                                     ch.config.pubkey_b));
      // Each checkpoint freezes the balances as of its own sequence.
      const OracleResult at = oracle_replay(
          std::span(chain).first(out.checkpoint.sequence), ch.config);
      CHECK(out.checkpoint.balances == at.balances);
      CHECK(out.checkpoint.chain_head == at.chain_head);
      seqs.push_back(out.checkpoint.sequence);
    }
    CHECK(seqs == expected);
  }
}

TEST_CASE("timeout checkpoints commit each idle tail exactly once") {
  Channel ch;
  ch.config.checkpoint_timeout = 50;
  const auto chain = ch.build_chain(5);
  ChannelNode node(ch.config, ch.a.private_key, ch.b.private_key);

  node.ingest(chain[0], 0);
  node.ingest(chain[1], 1);
  node.ingest(chain[2], 2);

  std::vector<std::pair<Tick, std::uint64_t>> fires;
  for (Tick t = 0; t <= 200; ++t) {
    if (t == 60) node.ingest(chain[3], t);
    if (t == 61) node.ingest(chain[4], t);
    if (auto out = node.on_tick(t)) {
      CHECK(out->checkpoint.reason == CheckpointReason::TIMEOUT);
      fires.emplace_back(t, out->checkpoint.sequence);
    }
  }
  // One fire per idle window: the first tail ages out 50 ticks after the
  // oldest uncommitted transaction landed, likewise the second burst.
  const std::vector<std::pair<Tick, std::uint64_t>> expected{{50, 3},
                                                             {110, 5}};
  CHECK(fires == expected);
}

TEST_CASE("a modulo checkpoint disarms the pending timeout") {
  Channel ch;
  ch.config.m = 3;
  ch.config.checkpoint_timeout = 10;
  const auto chain = ch.build_chain(3);
  ChannelNode node(ch.config, ch.a.private_key, ch.b.private_key);

  std::vector<NodeOutput> outs = ingest_all(node, chain, 0);
  REQUIRE(outs.size() == 1);
  CHECK(outs[0].checkpoint.reason == CheckpointReason::MODULO);
  for (Tick t = 1; t <= 40; ++t) CHECK_FALSE(node.on_tick(t).has_value());
}

TEST_CASE("control messages produce settlement requests and transcripts") {
  Channel ch;
  ch.config.m = 5;
  const auto chain = ch.build_chain(8);
  ChannelNode node(ch.config, ch.a.private_key, ch.b.private_key);
  ingest_all(node, chain);

  ControlMessage request;
  request.channel = "test";
  request.kind = ControlKind::UNSCHEDULED_SETTLEMENT;
  request.requester = ch.config.party_a;
  const NodeOutput settle = node.handle_control(request, 20);
  CHECK(settle.kind == NodeOutput::Kind::SETTLEMENT_REQUEST);
  CHECK(settle.checkpoint.sequence == 8);
  CHECK(settle.checkpoint.reason == CheckpointReason::UNSCHEDULED);
  CHECK(settle.checkpoint.balances == node.balances());
  CHECK(checkpoint_signatures_ok(settle.checkpoint, ch.config.pubkey_a,
                                 ch.config.pubkey_b));

  ControlMessage dispute;
  dispute.channel = "test";
  dispute.kind = ControlKind::DISPUTED_SETTLEMENT;
  dispute.requester = ch.config.party_b;

  // Default baseline: the last emitted checkpoint (modulo at 5).
  ChannelNode node2(ch.config, ch.a.private_key, ch.b.private_key);
  ingest_all(node2, chain);
  const NodeOutput t1 = node2.handle_control(dispute, 21);
  CHECK(t1.kind == NodeOutput::Kind::DISPUTE_SUBMISSION);
  REQUIRE(t1.transcript.size() == 3);
  CHECK(t1.transcript.front().sequence == 6);
  CHECK(t1.transcript.back().sequence == 8);

  // Explicit baseline override.
  const NodeOutput t2 = node2.handle_control(dispute, 22, 2);
  REQUIRE(t2.transcript.size() == 6);
  CHECK(t2.transcript.front().sequence == 3);

  ControlMessage foreign = request;
  foreign.channel = "elsewhere";
  CHECK_THROWS_AS(node.handle_control(foreign, 23), ConfigError);
}

TEST_CASE("reconstruct_order rebuilds a shuffled buffer from the head") {
  const Channel ch;
  const auto chain = ch.build_chain(9);

  std::vector<SignedInvoice> buffer(chain.begin(), chain.end());
  std::ranges::rotate(buffer, buffer.begin() + 4);
  std::swap(buffer[0], buffer[7]);
  buffer.push_back(chain[3]);  // duplicate entry

  const ReconstructResult r = reconstruct_order(buffer, Hash256::ZERO);
  REQUIRE(r.ordered.size() == chain.size());
  CHECK(std::equal(r.ordered.begin(), r.ordered.end(), chain.begin()));
  CHECK(r.remaining.empty());
}

TEST_CASE("reconstruct_order reports unlinked leftovers and forks") {
  const Channel ch;
  const auto chain = ch.build_chain(6);

  std::vector<SignedInvoice> gappy{chain[0], chain[1], chain[4], chain[5]};
  const ReconstructResult r = reconstruct_order(gappy, Hash256::ZERO);
  CHECK(r.ordered.size() == 2);
  CHECK(r.remaining.size() == 2);

  Rng id_rng(17);
  Invoice inv;
  inv.invoice_address = derive_address(ch.b.public_key, Currency::ETH);
  inv.price = 2;
  inv.currency = Currency::ETH;
  const SignedInvoice rival =
      make_signed_invoice(inv, &chain[2], "test", 4, ch.a, ch.b, id_rng);
  std::vector<SignedInvoice> forked{chain[0], chain[1], chain[2], chain[3],
                                    rival};
  CHECK_THROWS_AS(reconstruct_order(forked, Hash256::ZERO), ForkDetected);
}

TEST_CASE("snapshot and restore round-trip the node state") {
  Channel ch;
  ch.config.m = 4;
  ch.config.checkpoint_timeout = 30;
  const auto chain = ch.build_chain(6);
  ChannelNode node(ch.config, ch.a.private_key, ch.b.private_key);
  ingest_all(node, chain, 12);

  const auto path =
      std::filesystem::temp_directory_path() / "parsec_node_snapshot.plog";
  node.snapshot(path);
  ChannelNode back =
      ChannelNode::restore(path, ch.a.private_key, ch.b.private_key);

  CHECK(back.config() == node.config());
  CHECK(back.balances() == node.balances());
  CHECK(back.chain_head() == node.chain_head());
  CHECK(back.next_sequence() == node.next_sequence());
  CHECK(back.last_checkpoint_sequence() == node.last_checkpoint_sequence());
  CHECK(back.poisoned() == node.poisoned());

  // The restored node keeps working where the old one stopped: the two
  // uncommitted transactions (5, 6) age out into a TIMEOUT checkpoint.
  auto fired = back.on_tick(42);
  REQUIRE(fired.has_value());
  CHECK(fired->checkpoint.sequence == 6);
  CHECK(fired->checkpoint.reason == CheckpointReason::TIMEOUT);

  std::filesystem::remove(path);
}

TEST_CASE("restore refuses a tampered snapshot") {
  const Channel ch;
  const auto chain = ch.build_chain(4);
  ChannelNode node = fresh_node(ch);
  ingest_all(node, chain);

  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "parsec_tampered_snapshot.plog";
  node.snapshot(path);

  auto frames = read_plog(path);
  SignedInvoice si = decode_signed_invoice(frames[3]);
  si.price += 7;
  frames[3] = canonical_encode(si, EncodeMode::Storage);
  write_plog(path, frames);

  CHECK_THROWS_AS(
      ChannelNode::restore(path, ch.a.private_key, ch.b.private_key),
      ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("batch ingestion equals element-wise ingestion") {
  const Channel ch;
  auto chain = ch.build_chain(40);
  // Shuffle lightly within the window.
  for (std::size_t i = 0; i + 3 < chain.size(); i += 4)
    std::swap(chain[i], chain[i + 2]);

  ChannelNode a = fresh_node(ch);
  ChannelNode b = fresh_node(ch);
  std::vector<IngestStatus> one, two;
  for (const SignedInvoice& si : chain) one.push_back(a.ingest(si, 3).status);
  for (const IngestResult& r : b.ingest_batch(chain, 3))
    two.push_back(r.status);

  CHECK(one == two);
  CHECK(a.balances() == b.balances());
  CHECK(a.chain_head() == b.chain_head());
  CHECK(a.next_sequence() == b.next_sequence());
}

TEST_CASE("balances always sum to the deposits") {
  const Channel ch(700, 300);
  const auto chain = ch.build_chain(21);
  ChannelNode node(ch.config, ch.a.private_key, ch.b.private_key);
  for (const SignedInvoice& si : chain) {
    node.ingest(si, 0);
    std::uint64_t sum = 0;
    for (const auto& [addr, v] : node.balances()) sum += v;
    CHECK(sum == 1000);
  }
}

TEST_CASE("oracle_replay rejects invalid chains") {
  const Channel ch;
  auto chain = ch.build_chain(5);
  CHECK_NOTHROW(oracle_replay(chain, ch.config));

  auto broken = chain;
  broken[2].price += 1;
  CHECK_THROWS_AS(oracle_replay(broken, ch.config), InvalidChain);

  auto reordered = chain;
  std::swap(reordered[1], reordered[2]);
  CHECK_THROWS_AS(oracle_replay(reordered, ch.config), InvalidChain);

  const Channel poor(2, 2);
  Rng id_rng(31);
  Invoice inv;
  inv.invoice_address = derive_address(poor.b.public_key, Currency::ETH);
  inv.price = 50;
  inv.currency = Currency::ETH;
  const SignedInvoice overdraft =
      make_signed_invoice(inv, nullptr, "test", 1, poor.a, poor.b, id_rng);
  CHECK_THROWS_AS(oracle_replay(std::vector{overdraft}, poor.config),
                  InvalidChain);
}
