#include "parsec/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace parsec {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    if (tok.starts_with('#')) break;
    out.push_back(tok);
  }
  return out;
}

std::uint64_t parse_u64(const std::string& tok, int line_no) {
  std::uint64_t v = 0;
  const auto [ptr, ec] =
      std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ScenarioError("line " + std::to_string(line_no) +
                        ": expected a number, got '" + tok + "'");
  return v;
}

Rational parse_rational(const std::string& tok, int line_no) {
  const auto slash = tok.find('/');
  if (slash == std::string::npos)
    return {static_cast<std::uint32_t>(parse_u64(tok, line_no)), 1};
  return {static_cast<std::uint32_t>(parse_u64(tok.substr(0, slash), line_no)),
          static_cast<std::uint32_t>(
              parse_u64(tok.substr(slash + 1), line_no))};
}

void expect_args(const std::vector<std::string>& toks, std::size_t count,
                 int line_no, const std::string& usage) {
  if (toks.size() != count)
    throw ScenarioError("line " + std::to_string(line_no) + ": usage: " +
                        usage);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  return std::ranges::all_of(s, [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

}  // namespace

const PartyDecl& Scenario::party(const std::string& name) const {
  for (const auto& p : parties)
    if (p.name == name) return p;
  throw ScenarioError("unknown party " + name);
}

const ChannelDecl& Scenario::channel(const std::string& name) const {
  for (const auto& c : channels)
    if (c.name == name) return c;
  throw ScenarioError("unknown channel " + name);
}

Scenario Scenario::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse(in);
}

Scenario Scenario::parse(std::istream& in) {
  Scenario s;
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line))
    throw ScenarioError("empty scenario file");
  ++line_no;
  if (auto toks = tokenize(line);
      toks.size() != 2 || toks[0] != "parsec-scenario" || toks[1] != "v1")
    throw ScenarioError("scenario must start with 'parsec-scenario v1'");

  Tick advance_end = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    const std::string& head = toks[0];

    if (head == "seed") {
      expect_args(toks, 2, line_no, "seed <u64>");
      s.seed = parse_u64(toks[1], line_no);
      continue;
    }
    if (head == "challenge-period") {
      expect_args(toks, 2, line_no, "challenge-period <ticks>");
      s.challenge_period = parse_u64(toks[1], line_no);
      continue;
    }
    if (head == "partitions") {
      expect_args(toks, 2, line_no, "partitions <count>");
      s.partitions = static_cast<std::uint32_t>(parse_u64(toks[1], line_no));
      continue;
    }
    if (head == "fault") {
      expect_args(toks, 5, line_no, "fault dup <num>/<den> reorder <d>");
      if (toks[1] != "dup" || toks[3] != "reorder")
        throw ScenarioError("line " + std::to_string(line_no) +
                            ": usage: fault dup <num>/<den> reorder <d>");
      s.fault.duplicate_probability = parse_rational(toks[2], line_no);
      s.fault.max_reorder_distance =
          static_cast<std::uint32_t>(parse_u64(toks[4], line_no));
      continue;
    }
    if (head == "party") {
      expect_args(toks, 3, line_no, "party <name> <ETH|BTC>");
      PartyDecl p;
      p.name = toks[1];
      const auto c = parse_currency(toks[2]);
      if (!c)
        throw ScenarioError("line " + std::to_string(line_no) +
                            ": unknown currency " + toks[2]);
      p.currency = *c;
      s.parties.push_back(p);
      continue;
    }
    if (head == "channel") {
      const std::string usage =
          "channel <name> <a> <b> deposit <da> <db> n <n> m <m> timeout <t>";
      expect_args(toks, 13, line_no, usage);
      if (toks[4] != "deposit" || toks[7] != "n" || toks[9] != "m" ||
          toks[11] != "timeout")
        throw ScenarioError("line " + std::to_string(line_no) + ": usage: " +
                            usage);
      ChannelDecl c;
      c.name = toks[1];
      c.party_a = toks[2];
      c.party_b = toks[3];
      c.deposit_a = parse_u64(toks[5], line_no);
      c.deposit_b = parse_u64(toks[6], line_no);
      c.n = static_cast<std::uint32_t>(parse_u64(toks[8], line_no));
      c.m = parse_u64(toks[10], line_no);
      c.checkpoint_timeout = parse_u64(toks[12], line_no);
      s.channels.push_back(c);
      continue;
    }

    // Everything else is a timed action: <tick> <verb> <args...>
    const Tick tick = parse_u64(head, line_no);
    if (toks.size() < 2)
      throw ScenarioError("line " + std::to_string(line_no) +
                          ": action verb missing");
    const std::string& verb = toks[1];
    advance_end = std::max(advance_end, tick);

    if (verb == "pay") {
      expect_args(toks, 6, line_no, "<tick> pay <chan> <buyer> <supplier> "
                                    "<amount>");
      Action a;
      a.tick = tick;
      a.verb = Action::Verb::Pay;
      a.channel = toks[2];
      a.buyer = toks[3];
      a.supplier = toks[4];
      a.amount = parse_u64(toks[5], line_no);
      s.actions.push_back(a);
    } else if (verb == "control") {
      expect_args(toks, 5, line_no,
                  "<tick> control <chan> <unscheduled|disputed> <party>");
      Action a;
      a.tick = tick;
      a.verb = Action::Verb::Control;
      a.channel = toks[2];
      if (toks[3] == "unscheduled")
        a.control_kind = ControlKind::UNSCHEDULED_SETTLEMENT;
      else if (toks[3] == "disputed")
        a.control_kind = ControlKind::DISPUTED_SETTLEMENT;
      else
        throw ScenarioError("line " + std::to_string(line_no) +
                            ": control kind must be unscheduled or disputed");
      a.requester = toks[4];
      s.actions.push_back(a);
    } else if (verb == "htlc-lock") {
      expect_args(toks, 9, line_no,
                  "<tick> htlc-lock <chan> <payer> <payee> <amount> <name> "
                  "<preimage> <timeout-tick>");
      Action a;
      a.tick = tick;
      a.verb = Action::Verb::HtlcLock;
      a.channel = toks[2];
      a.payer = toks[3];
      a.payee = toks[4];
      a.amount = parse_u64(toks[5], line_no);
      a.lock_name = toks[6];
      a.preimage = toks[7];
      a.htlc_timeout = parse_u64(toks[8], line_no);
      advance_end = std::max(advance_end, a.htlc_timeout);
      s.actions.push_back(a);
    } else if (verb == "htlc-claim") {
      expect_args(toks, 5, line_no,
                  "<tick> htlc-claim <chan> <name> <preimage>");
      Action a;
      a.tick = tick;
      a.verb = Action::Verb::HtlcClaim;
      a.channel = toks[2];
      a.lock_name = toks[3];
      a.preimage = toks[4];
      s.actions.push_back(a);
    } else if (verb == "htlc-refund") {
      expect_args(toks, 4, line_no, "<tick> htlc-refund <chan> <name>");
      Action a;
      a.tick = tick;
      a.verb = Action::Verb::HtlcRefund;
      a.channel = toks[2];
      a.lock_name = toks[3];
      s.actions.push_back(a);
    } else if (verb == "settle-stale") {
      expect_args(toks, 4, line_no, "<tick> settle-stale <chan> <party>");
      Action a;
      a.tick = tick;
      a.verb = Action::Verb::SettleStale;
      a.channel = toks[2];
      a.requester = toks[3];
      s.actions.push_back(a);
    } else if (verb == "relay") {
      expect_args(toks, 12, line_no,
                  "<tick> relay <upchan> <downchan> <sender> <relayer> "
                  "<receiver> <amount> <preimage> <timeout-tick> <stagger> "
                  "<happy|abort>");
      const std::string& upchan = toks[2];
      const std::string& downchan = toks[3];
      const std::string& sender = toks[4];
      const std::string& relayer = toks[5];
      const std::string& receiver = toks[6];
      const std::uint64_t amount = parse_u64(toks[7], line_no);
      const std::string& preimage = toks[8];
      const Tick t_down = parse_u64(toks[9], line_no);
      const Tick stagger = parse_u64(toks[10], line_no);
      const std::string& mode = toks[11];
      if (stagger < 1)
        throw ScenarioError("line " + std::to_string(line_no) +
                            ": relay timeouts must be staggered by >= 1 tick");
      if (t_down <= tick + 1)
        throw ScenarioError("line " + std::to_string(line_no) +
                            ": downstream timeout leaves no room to claim");
      if (mode != "happy" && mode != "abort")
        throw ScenarioError("line " + std::to_string(line_no) +
                            ": relay mode must be happy or abort");

      Action down;
      down.tick = tick;
      down.verb = Action::Verb::HtlcLock;
      down.channel = downchan;
      down.payer = relayer;
      down.payee = receiver;
      down.amount = amount;
      down.lock_name = "relay-" + std::to_string(line_no) + "-down";
      down.preimage = preimage;
      down.htlc_timeout = t_down;

      Action up = down;
      up.channel = upchan;
      up.payer = sender;
      up.payee = relayer;
      up.lock_name = "relay-" + std::to_string(line_no) + "-up";
      up.htlc_timeout = t_down + stagger;

      s.actions.push_back(down);
      s.actions.push_back(up);
      advance_end = std::max(advance_end, up.htlc_timeout + 1);

      if (mode == "happy") {
        // Receiver claims downstream, revealing the preimage; the relayer
        // then claims upstream with it.
        Action claim_down;
        claim_down.tick = tick + 1;
        claim_down.verb = Action::Verb::HtlcClaim;
        claim_down.channel = downchan;
        claim_down.lock_name = down.lock_name;
        claim_down.preimage = preimage;

        Action claim_up = claim_down;
        claim_up.tick = tick + 2;
        claim_up.channel = upchan;
        claim_up.lock_name = up.lock_name;

        s.actions.push_back(claim_down);
        s.actions.push_back(claim_up);
      } else {
        Action refund_down;
        refund_down.tick = t_down + 1;
        refund_down.verb = Action::Verb::HtlcRefund;
        refund_down.channel = downchan;
        refund_down.lock_name = down.lock_name;

        Action refund_up = refund_down;
        refund_up.tick = t_down + stagger + 1;
        refund_up.channel = upchan;
        refund_up.lock_name = up.lock_name;

        s.actions.push_back(refund_down);
        s.actions.push_back(refund_up);
      }
    } else if (verb == "advance") {
      expect_args(toks, 3, line_no, "<tick> advance <ticks>");
      advance_end = std::max(advance_end, tick + parse_u64(toks[2], line_no));
    } else {
      throw ScenarioError("line " + std::to_string(line_no) +
                          ": unknown verb " + verb);
    }
  }

  std::ranges::stable_sort(s.actions,
                           [](const Action& a, const Action& b) {
                             return a.tick < b.tick;
                           });
  s.horizon = advance_end;
  s.validate();
  return s;
}

void Scenario::validate() const {
  if (partitions < 1) throw ScenarioError("partitions must be >= 1");
  fault.validate();
  if (challenge_period == 0)
    throw ScenarioError("challenge period must be positive");

  if (parties.empty()) throw ScenarioError("no parties declared");
  for (std::size_t i = 0; i < parties.size(); ++i) {
    if (!valid_name(parties[i].name))
      throw ScenarioError("bad party name " + parties[i].name);
    for (std::size_t j = i + 1; j < parties.size(); ++j)
      if (parties[i].name == parties[j].name)
        throw ScenarioError("duplicate party " + parties[i].name);
  }
  if (channels.empty()) throw ScenarioError("no channels declared");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const ChannelDecl& c = channels[i];
    if (!valid_name(c.name)) throw ScenarioError("bad channel name " + c.name);
    for (std::size_t j = i + 1; j < channels.size(); ++j)
      if (c.name == channels[j].name)
        throw ScenarioError("duplicate channel " + c.name);
    const PartyDecl& a = party(c.party_a);
    const PartyDecl& b = party(c.party_b);
    if (a.name == b.name)
      throw ScenarioError("channel " + c.name + " parties must differ");
    if (a.currency != b.currency)
      throw ScenarioError("channel " + c.name +
                          " parties use different currencies");
    if (c.n < 1 || c.m < 1)
      throw ScenarioError("channel " + c.name + " needs n >= 1 and m >= 1");
    if (fault.max_reorder_distance >= c.n)
      throw ScenarioError("fault reorder distance must stay below channel " +
                          c.name + "'s buffer capacity");
  }

  std::map<std::string, std::map<std::string, Tick>> locks;  // chan -> name
  for (const Action& a : actions) {
    const ChannelDecl& c = channel(a.channel);
    const auto is_channel_party = [&](const std::string& p) {
      return p == c.party_a || p == c.party_b;
    };
    switch (a.verb) {
      case Action::Verb::Pay:
        if (!is_channel_party(a.buyer) || !is_channel_party(a.supplier) ||
            a.buyer == a.supplier)
          throw ScenarioError("pay on " + a.channel +
                              " must run between its two parties");
        if (a.amount == 0)
          throw ScenarioError("pay amount must be positive on " + a.channel);
        break;
      case Action::Verb::Control:
        if (!is_channel_party(a.requester))
          throw ScenarioError("control requester must be a party of " +
                              a.channel);
        break;
      case Action::Verb::HtlcLock: {
        if (!is_channel_party(a.payer) || !is_channel_party(a.payee) ||
            a.payer == a.payee)
          throw ScenarioError("htlc-lock on " + a.channel +
                              " must run between its two parties");
        if (a.htlc_timeout <= a.tick)
          throw ScenarioError("htlc-lock " + a.lock_name +
                              " timeout must lie after its tick");
        auto [it, inserted] =
            locks[a.channel].emplace(a.lock_name, a.htlc_timeout);
        if (!inserted)
          throw ScenarioError("duplicate lock name " + a.lock_name + " on " +
                              a.channel);
        break;
      }
      case Action::Verb::HtlcClaim:
      case Action::Verb::HtlcRefund:
        if (!locks[a.channel].contains(a.lock_name))
          throw ScenarioError("unknown lock " + a.lock_name + " on " +
                              a.channel);
        break;
      case Action::Verb::SettleStale:
        if (!is_channel_party(a.requester))
          throw ScenarioError("settle-stale requester must be a party of " +
                              a.channel);
        break;
    }
  }
}

}  // namespace parsec
