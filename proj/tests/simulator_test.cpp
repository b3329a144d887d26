#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "parsec/simulator.hpp"

using namespace parsec;

namespace {

Scenario parse_text(const std::string& body) {
  std::istringstream in("parsec-scenario v1\n" + body);
  return Scenario::parse(in);
}

constexpr const char* kTwoChannelBody = R"(
seed 42
challenge-period 40
partitions 2
fault dup 1/4 reorder 3

party alice ETH
party bob ETH
party carol ETH

channel ab alice bob deposit 500 500 n 4 m 4 timeout 0
channel ac alice carol deposit 300 700 n 4 m 3 timeout 12

0 pay ab alice bob 25
0 pay ac carol alice 40
1 pay ab bob alice 10
2 pay ab alice bob 5
2 pay ac alice carol 15
3 pay ab alice bob 30
4 pay ac carol alice 8
5 pay ab bob alice 12
6 advance 20
)";

std::filesystem::path scenario_path(const char* name) {
  return std::filesystem::path(SCENARIO_DIR) / name;
}

const ChannelReport& channel_report(const SimReport& r,
                                    const std::string& name) {
  for (const ChannelReport& c : r.channels)
    if (c.channel == name) return c;
  throw std::out_of_range("no channel " + name + " in report");
}

}  // namespace

TEST_CASE("party keys and derived seeds are functions of seed and name") {
  const KeyPair a1 = party_keys(7, "alice");
  const KeyPair a2 = party_keys(7, "alice");
  CHECK(a1.public_key == a2.public_key);
  CHECK(a1.private_key.bytes == a2.private_key.bytes);
  CHECK_FALSE(party_keys(7, "bob").public_key == a1.public_key);
  CHECK_FALSE(party_keys(8, "alice").public_key == a1.public_key);

  const std::uint64_t s = derived_seed(7, "stream", "ab");
  CHECK(derived_seed(7, "stream", "ab") == s);
  CHECK(derived_seed(7, "stream", "ac") != s);
  CHECK(derived_seed(7, "ids", "ab") != s);
  CHECK(derived_seed(9, "stream", "ab") != s);
}

TEST_CASE("scenario files parse into declarations and sorted actions") {
  const Scenario s = parse_text(kTwoChannelBody);
  CHECK(s.seed == 42);
  CHECK(s.challenge_period == 40);
  CHECK(s.partitions == 2);
  CHECK(s.fault.duplicate_probability.num == 1);
  CHECK(s.fault.duplicate_probability.den == 4);
  CHECK(s.fault.max_reorder_distance == 3);
  CHECK(s.parties.size() == 3);
  CHECK(s.channels.size() == 2);
  CHECK(s.channel("ac").checkpoint_timeout == 12);
  CHECK(s.channel("ac").deposit_b == 700);
  CHECK(s.actions.size() == 8);
  CHECK(std::ranges::is_sorted(s.actions, {}, &Action::tick));
  CHECK(s.horizon == 26);
  CHECK_THROWS_AS(s.party("mallory"), ScenarioError);
  CHECK_THROWS_AS(s.channel("bc"), ScenarioError);
}

TEST_CASE("malformed scenarios are rejected with line context") {
  const auto rejects = [](const std::string& body, const char* fragment) {
    CAPTURE(body);
    CAPTURE(fragment);
    try {
      parse_text(body);
      FAIL_CHECK("expected ScenarioError");
    } catch (const ScenarioError& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };

  std::istringstream empty("");
  CHECK_THROWS_AS(Scenario::parse(empty), ScenarioError);
  std::istringstream wrong_header("parsec-scenario v2\n");
  CHECK_THROWS_AS(Scenario::parse(wrong_header), ScenarioError);

  const std::string decls =
      "party alice ETH\nparty bob ETH\n"
      "channel main alice bob deposit 100 100 n 4 m 2 timeout 0\n";

  rejects(decls + "0 teleport main alice\n", "unknown verb");
  rejects("party alice ETH\nparty alice ETH\n"
          "channel main alice alice deposit 1 1 n 1 m 1 timeout 0\n",
          "duplicate party");
  rejects("party alice ETH\n"
          "channel main alice alice deposit 1 1 n 1 m 1 timeout 0\n",
          "parties must differ");
  rejects("party alice ETH\nparty bob BTC\n"
          "channel main alice bob deposit 1 1 n 1 m 1 timeout 0\n",
          "currencies");
  rejects("fault dup 1/2 reorder 4\n" + decls + "0 pay main alice bob 5\n",
          "reorder");
  rejects(decls + "0 pay main alice bob 0\n", "positive");
  rejects(decls + "0 pay main alice mallory 5\n",
          "between its two parties");
  rejects(decls + "0 pay side alice bob 5\n", "unknown channel");
  rejects(decls + "0 htlc-lock main alice bob 10 l p 0\n",
          "timeout must lie after");
  rejects(decls + "0 htlc-claim main ghost p\n", "unknown lock");
  rejects(decls + "0 htlc-lock main alice bob 10 l p 9\n"
                  "1 htlc-lock main bob alice 10 l q 9\n",
          "duplicate lock");
  rejects(decls + "3 relay main main alice bob bob 10 p 9 0 happy\n",
          "staggered");
  rejects(decls + "3 relay main main alice bob bob 10 p 6 2 maybe\n",
          "happy or abort");
  rejects(decls + "0 pay main alice bob\n", "usage");
}

TEST_CASE("a scenario that overdraws a channel is refused up front") {
  const Scenario s = parse_text(
      "party alice ETH\nparty bob ETH\n"
      "channel main alice bob deposit 50 50 n 2 m 10 timeout 0\n"
      "0 pay main alice bob 40\n"
      "1 pay main alice bob 40\n");
  CHECK_THROWS_AS(run_scenario(s), ScenarioError);
}

TEST_CASE("runs are deterministic for a fixed seed") {
  const Scenario s = parse_text(kTwoChannelBody);
  const SimReport first = run_scenario(s);
  const SimReport second = run_scenario(s);
  CHECK(first.render(ReportFormat::Text) == second.render(ReportFormat::Text));
  CHECK(first.render(ReportFormat::Kv) == second.render(ReportFormat::Kv));

  // And a different seed actually changes the delivery schedule.
  Scenario other = s;
  other.seed = 43;
  const SimReport third = run_scenario(other);
  CHECK(first.render(ReportFormat::Kv) != third.render(ReportFormat::Kv));
}

TEST_CASE("parallel execution is byte-identical to serial") {
  const Scenario s = parse_text(kTwoChannelBody);
  const SimReport serial = run_scenario(s, SimMode::Serial);
  const SimReport parallel = run_scenario(s, SimMode::Parallel);
  CHECK(serial.render(ReportFormat::Text) ==
        parallel.render(ReportFormat::Text));
  CHECK(serial.render(ReportFormat::Kv) == parallel.render(ReportFormat::Kv));
}

TEST_CASE("faulted delivery never diverges from the oracle") {
  Scenario s = parse_text(kTwoChannelBody);
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 77ULL, 1234ULL}) {
    CAPTURE(seed);
    s.seed = seed;
    const SimReport r = run_scenario(s);
    CHECK_FALSE(r.diverged());
    for (const ChannelReport& c : r.channels) {
      CAPTURE(c.channel);
      CHECK(c.divergence.empty());
      CHECK(c.node_balances == c.oracle_balances);
      CHECK(c.node_head == c.oracle_head);
      CHECK(c.node_next_sequence == c.oracle_final_sequence + 1);
      CHECK(c.applied == c.oracle_final_sequence);
      CHECK(c.delivery.max_displacement <= s.fault.max_reorder_distance);

      std::uint64_t payout_sum = 0;
      for (const auto& [addr, v] : c.payouts) payout_sum += v;
      const ChannelDecl& decl = s.channel(c.channel);
      CHECK(payout_sum == decl.deposit_a + decl.deposit_b);
    }
  }
}

TEST_CASE("checkpoints land on the contract as they are emitted") {
  const Scenario s = parse_text(kTwoChannelBody);
  const SimReport r = run_scenario(s);

  // ab runs m=4 over 5 transactions: one modulo checkpoint at sequence 4.
  const ChannelReport& ab = channel_report(r, "ab");
  REQUIRE(ab.checkpoints.size() == 1);
  CHECK(ab.checkpoints[0].reason == CheckpointReason::MODULO);
  CHECK(ab.checkpoints[0].sequence == 4);
  CHECK(ab.checkpoints[0].submit_status == EscrowStatus::Ok);
  CHECK(ab.settled_sequence == 5);

  // ac runs m=3 with timeout 12 over 3 transactions: the modulo checkpoint
  // at 3 commits everything, so the timer never fires afterwards.
  const ChannelReport& ac = channel_report(r, "ac");
  REQUIRE(ac.checkpoints.size() == 1);
  CHECK(ac.checkpoints[0].reason == CheckpointReason::MODULO);
  CHECK(ac.checkpoints[0].sequence == 3);
  CHECK(ac.settled_sequence == 3);
}

TEST_CASE("reports carry the expected shape in both formats") {
  const Scenario s = parse_text(kTwoChannelBody);
  const SimReport r = run_scenario(s);

  const std::string text = r.render(ReportFormat::Text);
  CHECK(text.starts_with("parsec-report v1\nseed 42\nchannels 2\n"));
  CHECK(text.find("channel ab\n") != std::string::npos);
  CHECK(text.find("divergence none") != std::string::npos);

  const std::string kv = r.render(ReportFormat::Kv);
  CHECK(kv.starts_with("report.version=1\nseed=42\nchannels=2\n"));
  CHECK(kv.find("channel.ab.ingest.applied=5") != std::string::npos);
  CHECK(kv.find("channel.ac.divergence=0") != std::string::npos);

  CHECK(parse_report_format("text") == ReportFormat::Text);
  CHECK(parse_report_format("kv") == ReportFormat::Kv);
  CHECK_FALSE(parse_report_format("yaml").has_value());
}

TEST_CASE("shipped scenarios run clean") {
  for (const char* name :
       {"happy.scn", "faulty.scn", "stale_settlement.scn", "relay_happy.scn",
        "relay_abort.scn", "timeout_checkpoint.scn"}) {
    CAPTURE(name);
    const Scenario s = Scenario::parse_file(scenario_path(name));
    const SimReport r = run_scenario(s);
    CHECK_FALSE(r.diverged());
    for (const ChannelReport& c : r.channels) CHECK(c.settled_sequence > 0);
  }
}

TEST_CASE("the stale settlement scenario settles on the disputed tail") {
  const Scenario s = Scenario::parse_file(scenario_path("stale_settlement.scn"));
  const SimReport r = run_scenario(s);
  const ChannelReport& main = channel_report(r, "main");

  // The stale request sat at the last checkpoint (sequence 5); the dispute
  // replayed the rest of the chain and settlement landed at 9.
  CHECK(main.oracle_final_sequence == 9);
  CHECK(main.settled_sequence == 9);
  CHECK(main.payouts == main.oracle_balances);
  const bool disputed = std::ranges::any_of(
      main.events,
      [](const std::string& e) { return e.find("dispute") == 0; });
  CHECK(disputed);
}

TEST_CASE("relay scenarios resolve both locks the same way") {
  const Scenario happy = Scenario::parse_file(scenario_path("relay_happy.scn"));
  const SimReport hr = run_scenario(happy);
  for (const char* name : {"up", "down"}) {
    const ChannelReport& c = channel_report(hr, name);
    REQUIRE(c.htlc_final.size() == 1);
    CHECK(c.htlc_final[0].status == HtlcStatus::CLAIMED);
  }

  const Scenario abort = Scenario::parse_file(scenario_path("relay_abort.scn"));
  const SimReport ar = run_scenario(abort);
  for (const char* name : {"up", "down"}) {
    const ChannelReport& c = channel_report(ar, name);
    REQUIRE(c.htlc_final.size() == 1);
    CHECK(c.htlc_final[0].status == HtlcStatus::REFUNDED);
  }

  // Atomicity in balances: the relayed amount moves end to end or not at
  // all, and the relayer nets zero either way.
  const auto payout = [&](const SimReport& r, const char* chan,
                          const char* party) {
    const Scenario& sc = r.seed == hr.seed ? happy : abort;
    const ChannelReport& c = channel_report(r, chan);
    return c.payouts.at(
        derive_address(party_keys(sc.seed, party).public_key,
                       sc.party(party).currency));
  };
  // Relayer bob: pays 120 downstream, recovers 120 upstream.
  CHECK(payout(hr, "up", "bob") - payout(ar, "up", "bob") == 120);
  CHECK(payout(ar, "down", "bob") - payout(hr, "down", "bob") == 120);
}

TEST_CASE("timeout checkpoints appear in the scenario report") {
  const Scenario s =
      Scenario::parse_file(scenario_path("timeout_checkpoint.scn"));
  const SimReport r = run_scenario(s);
  const ChannelReport& main = channel_report(r, "main");

  std::vector<std::pair<Tick, std::uint64_t>> fires;
  for (const CheckpointEntry& e : main.checkpoints)
    if (e.reason == CheckpointReason::TIMEOUT)
      fires.emplace_back(e.tick, e.sequence);
  const std::vector<std::pair<Tick, std::uint64_t>> expected{{10, 3},
                                                             {35, 5}};
  CHECK(fires == expected);
}
