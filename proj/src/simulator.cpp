#include "parsec/simulator.hpp"

#include <algorithm>
#include <sstream>

namespace parsec {

std::optional<ReportFormat> parse_report_format(std::string_view name) {
  if (name == "text") return ReportFormat::Text;
  if (name == "kv") return ReportFormat::Kv;
  return std::nullopt;
}

std::uint64_t derived_seed(std::uint64_t seed, std::string_view domain,
                           const std::string& name) {
  Bytes material;
  material.insert(material.end(), domain.begin(), domain.end());
  put_u64be(material, seed);
  material.insert(material.end(), name.begin(), name.end());
  const Hash256 h = digest(material);
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out = (out << 8) | h.bytes[i];
  return out;
}

KeyPair party_keys(std::uint64_t seed, const std::string& name) {
  Bytes material;
  const std::string_view domain = "parsec.party";
  material.insert(material.end(), domain.begin(), domain.end());
  put_u64be(material, seed);
  material.insert(material.end(), name.begin(), name.end());
  return KeyPair::from_seed(digest(material).span());
}

namespace {

struct ChannelPlan {
  ChannelConfig config;
  std::string name_a;  // scenario party names, for resolving action args
  std::string name_b;
  KeyPair keys_a;
  KeyPair keys_b;
  std::vector<SignedInvoice> true_chain;
  std::uint32_t partition = 0;
  std::vector<Action> direct;  // HTLC ops and stale settlements, tick order
  std::uint64_t stream_seed = 0;

  Address resolve(const std::string& party_name) const {
    return party_name == name_a ? config.party_a : config.party_b;
  }
};

struct Plan {
  EventLog log;
  std::vector<ChannelPlan> channels;
  std::vector<std::vector<Tick>> tx_append_ticks;  // per partition
  std::vector<Tick> control_append_ticks;
  Tick horizon = 0;
  ChallengeParams challenge;
  FaultProfile fault;
};

constexpr const char* kTxTopic = "transactions";
constexpr const char* kControlTopic = "control";

Plan build_plan(const Scenario& s) {
  Plan plan;
  plan.horizon = s.horizon;
  plan.challenge.challenge_period = s.challenge_period;
  plan.fault = s.fault;

  std::map<std::string, KeyPair> keys;
  std::map<std::string, Address> addresses;
  for (const PartyDecl& p : s.parties) {
    keys[p.name] = party_keys(s.seed, p.name);
    addresses[p.name] =
        derive_address(keys[p.name].public_key.span(), p.currency);
  }

  plan.log.create_topic(kTxTopic, s.partitions);
  plan.log.create_topic(kControlTopic, 1);
  plan.tx_append_ticks.resize(s.partitions);

  std::map<std::string, std::size_t> index;
  for (const ChannelDecl& decl : s.channels) {
    ChannelPlan cp;
    const PartyDecl& pa = s.party(decl.party_a);
    cp.config.channel = decl.name;
    cp.config.currency = pa.currency;
    cp.config.party_a = addresses[decl.party_a];
    cp.config.party_b = addresses[decl.party_b];
    cp.config.pubkey_a = keys[decl.party_a].public_key;
    cp.config.pubkey_b = keys[decl.party_b].public_key;
    cp.config.deposit_a = decl.deposit_a;
    cp.config.deposit_b = decl.deposit_b;
    cp.config.n = decl.n;
    cp.config.m = decl.m;
    cp.config.checkpoint_timeout = decl.checkpoint_timeout;
    cp.config.validate();
    cp.name_a = decl.party_a;
    cp.name_b = decl.party_b;
    cp.keys_a = keys[decl.party_a];
    cp.keys_b = keys[decl.party_b];
    cp.partition = plan.log.partition_for(kTxTopic, str_bytes(decl.name));
    cp.stream_seed = derived_seed(s.seed, "parsec.stream", decl.name);
    index[decl.name] = plan.channels.size();
    plan.channels.push_back(std::move(cp));
  }

  // Builder state per channel: rng for invoice ids, true balances.
  std::vector<Rng> id_rngs;
  std::vector<std::map<Address, std::uint64_t>> balances;
  for (const ChannelPlan& cp : plan.channels) {
    id_rngs.emplace_back(derived_seed(s.seed, "parsec.ids", cp.config.channel));
    balances.push_back({{cp.config.party_a, cp.config.deposit_a},
                        {cp.config.party_b, cp.config.deposit_b}});
  }

  for (const Action& a : s.actions) {
    const std::size_t ci = index.at(a.channel);
    ChannelPlan& cp = plan.channels[ci];
    switch (a.verb) {
      case Action::Verb::Pay: {
        const Address buyer_addr = addresses.at(a.buyer);
        const Address supplier_addr = addresses.at(a.supplier);
        if (balances[ci].at(buyer_addr) < a.amount)
          throw ScenarioError("pay of " + std::to_string(a.amount) + " on " +
                              a.channel + " at tick " +
                              std::to_string(a.tick) + " overdraws " +
                              a.buyer);
        Invoice inv;
        inv.invoice_address = supplier_addr;
        inv.price = a.amount;
        inv.currency = cp.config.currency;
        inv.invoice_type = "payment";
        const SignedInvoice* pred =
            cp.true_chain.empty() ? nullptr : &cp.true_chain.back();
        const SignedInvoice si = make_signed_invoice(
            inv, pred, a.channel, cp.true_chain.size() + 1, keys.at(a.buyer),
            keys.at(a.supplier), id_rngs[ci]);
        balances[ci].at(buyer_addr) -= a.amount;
        balances[ci].at(supplier_addr) += a.amount;
        const auto [partition, offset] = plan.log.append(
            kTxTopic, str_bytes(a.channel),
            canonical_encode(si, EncodeMode::Storage));
        plan.tx_append_ticks[partition].push_back(a.tick);
        cp.true_chain.push_back(si);
        break;
      }
      case Action::Verb::Control: {
        ControlMessage msg;
        msg.channel = a.channel;
        msg.kind = a.control_kind;
        msg.requester = addresses.at(a.requester);
        plan.log.append(kControlTopic, str_bytes(a.channel),
                        encode_control(msg));
        plan.control_append_ticks.push_back(a.tick);
        break;
      }
      default:
        cp.direct.push_back(a);
        break;
    }
  }
  return plan;
}

std::uint64_t available_by(const std::vector<Tick>& append_ticks, Tick t) {
  return static_cast<std::uint64_t>(
      std::ranges::upper_bound(append_ticks, t) - append_ticks.begin());
}

std::string escrow_event(const std::string& what, Tick tick,
                         const EscrowResult& r) {
  std::string line = what;
  line += " tick=" + std::to_string(tick);
  line += " status=";
  line += escrow_status_name(r.status);
  if (!r.ok() && !r.detail.empty()) line += " (" + r.detail + ")";
  return line;
}

ChannelReport run_channel(const Plan& plan, const ChannelPlan& cp) {
  ChannelReport report;
  report.channel = cp.config.channel;

  ChannelNode node(cp.config, cp.keys_a.private_key, cp.keys_b.private_key);
  EscrowContract contract(cp.config, plan.challenge);

  FaultProfile tx_profile = plan.fault;
  tx_profile.seed = cp.stream_seed;
  DeliveryStream tx_stream(plan.log, kTxTopic, {cp.partition}, tx_profile);
  DeliveryStream ctrl_stream(plan.log, kControlTopic, {0},
                             FaultProfile{cp.stream_seed, {0, 1}, 0, {0, 1}});

  std::map<std::string, std::string> lock_ids;
  std::size_t next_direct = 0;

  const auto run_output = [&](const NodeOutput& out, Tick t) {
    switch (out.kind) {
      case NodeOutput::Kind::CHECKPOINT: {
        const EscrowResult r = contract.submit_checkpoint(out.checkpoint, t);
        report.checkpoints.push_back(
            {out.checkpoint.reason, out.checkpoint.sequence, t, r.status});
        break;
      }
      case NodeOutput::Kind::SETTLEMENT_REQUEST: {
        const EscrowResult r = contract.request_settlement(out.checkpoint, t);
        report.events.push_back(escrow_event(
            "request seq=" + std::to_string(out.checkpoint.sequence), t, r));
        break;
      }
      case NodeOutput::Kind::DISPUTE_SUBMISSION: {
        const EscrowResult r = contract.dispute(out.transcript, t);
        std::string what =
            "dispute transcript=" + std::to_string(out.transcript.size());
        if (r.ok())
          what += " pending_seq=" + std::to_string(contract.pending_sequence());
        report.events.push_back(escrow_event(what, t, r));
        break;
      }
    }
  };

  for (Tick t = 0; t <= plan.horizon; ++t) {
    std::vector<NodeOutput> outputs;

    const std::uint64_t tx_limit =
        available_by(plan.tx_append_ticks[cp.partition], t);
    while (auto d = tx_stream.next(tx_limit)) {
      const RecordValue value = decode_record_value(d->record.value);
      const SignedInvoice* si = std::get_if<SignedInvoice>(&value);
      if (si == nullptr || si->channel != cp.config.channel) continue;
      const IngestResult res = node.ingest(*si, t);
      switch (res.status) {
        case IngestStatus::Applied: break;
        case IngestStatus::Duplicate: ++report.duplicates_ignored; break;
        case IngestStatus::Held: ++report.held; break;
        default: ++report.rejected; break;
      }
      report.applied += res.applied_count;
      for (const NodeOutput& out : res.outputs) outputs.push_back(out);
    }

    if (auto out = node.on_tick(t)) outputs.push_back(*out);

    const std::uint64_t ctrl_limit =
        available_by(plan.control_append_ticks, t);
    while (auto d = ctrl_stream.next(ctrl_limit)) {
      const RecordValue value = decode_record_value(d->record.value);
      const ControlMessage* msg = std::get_if<ControlMessage>(&value);
      if (msg == nullptr || msg->channel != cp.config.channel) continue;
      outputs.push_back(node.handle_control(*msg, t));
    }

    for (const NodeOutput& out : outputs) run_output(out, t);

    for (; next_direct < cp.direct.size() && cp.direct[next_direct].tick == t;
         ++next_direct) {
      const Action& a = cp.direct[next_direct];
      switch (a.verb) {
        case Action::Verb::HtlcLock: {
          const auto [r, id] = contract.htlc_lock(
              cp.resolve(a.payer), cp.resolve(a.payee), a.amount,
              digest(str_bytes(a.preimage)), a.htlc_timeout, t);
          if (r.ok()) lock_ids[a.lock_name] = id;
          report.events.push_back(
              escrow_event("htlc-lock " + a.lock_name, t, r));
          break;
        }
        case Action::Verb::HtlcClaim: {
          const auto it = lock_ids.find(a.lock_name);
          const EscrowResult r =
              it == lock_ids.end()
                  ? EscrowResult{EscrowStatus::UnknownLock,
                                 "lock was never placed"}
                  : contract.htlc_claim(it->second,
                                        str_bytes(a.preimage), t);
          report.events.push_back(
              escrow_event("htlc-claim " + a.lock_name, t, r));
          break;
        }
        case Action::Verb::HtlcRefund: {
          const auto it = lock_ids.find(a.lock_name);
          const EscrowResult r =
              it == lock_ids.end()
                  ? EscrowResult{EscrowStatus::UnknownLock,
                                 "lock was never placed"}
                  : contract.htlc_refund(it->second, t);
          report.events.push_back(
              escrow_event("htlc-refund " + a.lock_name, t, r));
          break;
        }
        case Action::Verb::SettleStale: {
          if (!contract.latest_checkpoint()) {
            report.events.push_back(
                "settle-stale tick=" + std::to_string(t) +
                " status=Skipped (no checkpoint on the contract)");
            break;
          }
          const Checkpoint stale = *contract.latest_checkpoint();
          const EscrowResult r = contract.request_settlement(stale, t);
          report.events.push_back(escrow_event(
              "settle-stale seq=" + std::to_string(stale.sequence), t, r));
          break;
        }
        default:
          break;
      }
    }
  }

  // Scenario end: settle whatever is not settled yet, then let the
  // challenge window lapse and finalize.
  Tick now = plan.horizon;
  if (contract.phase() != EscrowContract::Phase::Finalized) {
    ControlMessage msg;
    msg.channel = cp.config.channel;
    msg.kind = ControlKind::UNSCHEDULED_SETTLEMENT;
    msg.requester = cp.config.party_a;
    const NodeOutput out = node.handle_control(msg, now);
    run_output(out, now);
    if (contract.phase() == EscrowContract::Phase::Pending) {
      now = std::max(now, contract.challenge_deadline()) + 1;
      const EscrowResult r = contract.finalize(now);
      report.events.push_back(escrow_event("finalize", now, r));
    }
  }

  const OracleResult oracle = oracle_replay(cp.true_chain, cp.config);
  report.node_balances = node.balances();
  report.oracle_balances = oracle.balances;
  report.node_head = node.chain_head();
  report.oracle_head = oracle.chain_head;
  report.node_next_sequence = node.next_sequence();
  report.oracle_final_sequence = oracle.final_sequence;
  if (contract.phase() == EscrowContract::Phase::Finalized) {
    report.payouts = contract.payouts();
    report.settled_sequence = contract.final_sequence();
  }
  report.delivery = tx_stream.stats();

  for (const Action& a : cp.direct) {
    if (a.verb != Action::Verb::HtlcLock) continue;
    const auto it = lock_ids.find(a.lock_name);
    if (it == lock_ids.end()) {
      report.htlc_final.push_back({a.lock_name, "-", HtlcStatus::OPEN});
    } else {
      report.htlc_final.push_back(
          {a.lock_name, it->second, contract.htlcs().at(it->second).status});
    }
  }

  if (report.node_balances != report.oracle_balances)
    report.divergence.push_back("balances differ from oracle");
  if (report.node_head != report.oracle_head)
    report.divergence.push_back("chain head differs from oracle");
  if (report.node_next_sequence != report.oracle_final_sequence + 1)
    report.divergence.push_back("applied sequence differs from oracle");
  if (node.poisoned())
    report.divergence.push_back("chain poisoned by a funds violation");
  return report;
}

}  // namespace

bool SimReport::diverged() const {
  return std::ranges::any_of(
      channels, [](const ChannelReport& c) { return !c.divergence.empty(); });
}

SimReport run_scenario(const Scenario& s, SimMode mode) {
  s.validate();
  const Plan plan = build_plan(s);

  std::vector<ChannelReport> reports(plan.channels.size());
  std::vector<std::string> errors(plan.channels.size());
  const std::int64_t count = static_cast<std::int64_t>(plan.channels.size());

  if (mode == SimMode::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i) {
      try {
        reports[i] = run_channel(plan, plan.channels[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  } else {
    for (std::int64_t i = 0; i < count; ++i) {
      try {
        reports[i] = run_channel(plan, plan.channels[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty())
      throw ScenarioError("channel " + plan.channels[i].config.channel +
                          ": " + errors[i]);

  SimReport report;
  report.seed = s.seed;
  report.channels = std::move(reports);
  return report;
}

namespace {

void render_channel_text(std::ostream& out, const ChannelReport& c) {
  out << "channel " << c.channel << "\n";
  out << "  delivery deliveries=" << c.delivery.deliveries
      << " duplicates=" << c.delivery.duplicates
      << " max_displacement=" << c.delivery.max_displacement << "\n";
  out << "  ingest applied=" << c.applied
      << " duplicate=" << c.duplicates_ignored << " held=" << c.held
      << " rejected=" << c.rejected << "\n";
  for (const CheckpointEntry& e : c.checkpoints)
    out << "  checkpoint " << checkpoint_reason_name(e.reason)
        << " seq=" << e.sequence << " tick=" << e.tick
        << " submit=" << escrow_status_name(e.submit_status) << "\n";
  for (const std::string& e : c.events) out << "  event " << e << "\n";
  for (const HtlcEntry& h : c.htlc_final)
    out << "  htlc " << h.name << " " << h.lock_id << " "
        << htlc_status_name(h.status) << "\n";
  for (const auto& [addr, amount] : c.node_balances)
    out << "  node " << addr.display() << "=" << amount << "\n";
  for (const auto& [addr, amount] : c.oracle_balances)
    out << "  oracle " << addr.display() << "=" << amount << "\n";
  for (const auto& [addr, amount] : c.payouts)
    out << "  payout " << addr.display() << "=" << amount << "\n";
  out << "  head node=" << c.node_head.hex()
      << " oracle=" << c.oracle_head.hex() << "\n";
  out << "  sequence node_next=" << c.node_next_sequence
      << " oracle_final=" << c.oracle_final_sequence
      << " settled=" << c.settled_sequence << "\n";
  if (c.divergence.empty()) {
    out << "  divergence none\n";
  } else {
    for (const std::string& d : c.divergence)
      out << "  divergence " << d << "\n";
  }
}

void render_channel_kv(std::ostream& out, const ChannelReport& c) {
  const std::string p = "channel." + c.channel + ".";
  out << p << "delivery.deliveries=" << c.delivery.deliveries << "\n";
  out << p << "delivery.duplicates=" << c.delivery.duplicates << "\n";
  out << p << "delivery.max_displacement=" << c.delivery.max_displacement
      << "\n";
  out << p << "ingest.applied=" << c.applied << "\n";
  out << p << "ingest.duplicate=" << c.duplicates_ignored << "\n";
  out << p << "ingest.held=" << c.held << "\n";
  out << p << "ingest.rejected=" << c.rejected << "\n";
  for (std::size_t i = 0; i < c.checkpoints.size(); ++i) {
    const CheckpointEntry& e = c.checkpoints[i];
    out << p << "checkpoint." << i << "="
        << checkpoint_reason_name(e.reason) << ",seq=" << e.sequence
        << ",tick=" << e.tick << ",submit="
        << escrow_status_name(e.submit_status) << "\n";
  }
  for (std::size_t i = 0; i < c.events.size(); ++i)
    out << p << "event." << i << "=" << c.events[i] << "\n";
  for (const HtlcEntry& h : c.htlc_final)
    out << p << "htlc." << h.name << "=" << h.lock_id << ","
        << htlc_status_name(h.status) << "\n";
  for (const auto& [addr, amount] : c.node_balances)
    out << p << "node." << addr.display() << "=" << amount << "\n";
  for (const auto& [addr, amount] : c.oracle_balances)
    out << p << "oracle." << addr.display() << "=" << amount << "\n";
  for (const auto& [addr, amount] : c.payouts)
    out << p << "payout." << addr.display() << "=" << amount << "\n";
  out << p << "head.node=" << c.node_head.hex() << "\n";
  out << p << "head.oracle=" << c.oracle_head.hex() << "\n";
  out << p << "sequence.node_next=" << c.node_next_sequence << "\n";
  out << p << "sequence.oracle_final=" << c.oracle_final_sequence << "\n";
  out << p << "sequence.settled=" << c.settled_sequence << "\n";
  out << p << "divergence=" << c.divergence.size() << "\n";
  for (std::size_t i = 0; i < c.divergence.size(); ++i)
    out << p << "divergence." << i << "=" << c.divergence[i] << "\n";
}

}  // namespace

std::string SimReport::render(ReportFormat format) const {
  std::ostringstream out;
  if (format == ReportFormat::Text) {
    out << "parsec-report v1\n";
    out << "seed " << seed << "\n";
    out << "channels " << channels.size() << "\n";
    for (const ChannelReport& c : channels) {
      out << "\n";
      render_channel_text(out, c);
    }
  } else {
    out << "report.version=1\n";
    out << "seed=" << seed << "\n";
    out << "channels=" << channels.size() << "\n";
    for (const ChannelReport& c : channels) render_channel_kv(out, c);
  }
  return out.str();
}

}  // namespace parsec
