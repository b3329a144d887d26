#include "parsec/event_log.hpp"

#include <algorithm>
#include <cstdlib>

#include "parsec/crypto.hpp"
#include "parsec/plog.hpp"

namespace parsec {

std::string_view control_kind_name(ControlKind k) {
  return k == ControlKind::UNSCHEDULED_SETTLEMENT ? "UNSCHEDULED_SETTLEMENT"
                                                  : "DISPUTED_SETTLEMENT";
}

Bytes encode_control(const ControlMessage& msg) {
  Bytes out;
  out.push_back(kTagControl);
  append_str_field(out, msg.channel);
  append_int_field(out, static_cast<std::uint64_t>(msg.kind));
  append_address_field(out, msg.requester);
  return out;
}

ControlMessage decode_control(ByteSpan bytes) {
  FieldReader r(bytes);
  if (r.read_raw_byte() != kTagControl)
    throw ParseError("not a control message");
  ControlMessage msg;
  msg.channel = r.read_str_field();
  const std::uint64_t kind = r.read_int_field();
  if (kind > 1) throw ParseError("unknown control kind");
  msg.kind = static_cast<ControlKind>(kind);
  msg.requester = read_address_field(r);
  r.expect_end();
  return msg;
}

RecordValue decode_record_value(ByteSpan bytes) {
  if (bytes.empty()) throw ParseError("empty record value");
  switch (bytes[0]) {
    case kTagSignedInvoice: return decode_signed_invoice(bytes);
    case kTagControl: return decode_control(bytes);
    default: throw ParseError("record value is not a protocol message");
  }
}

void FaultProfile::validate() const {
  if (duplicate_probability.den == 0 ||
      duplicate_probability.num > duplicate_probability.den)
    throw ConfigError("duplicate probability must be in [0,1]");
  if (drop_probability.num != 0)
    throw ConfigError("drop probability must be 0");
}

void EventLog::create_topic(const std::string& name, std::uint32_t partitions) {
  if (partitions < 1) throw ConfigError("topic needs at least one partition");
  if (topics_.contains(name)) throw ConfigError("duplicate topic " + name);
  topics_[name].partitions.resize(partitions);
}

bool EventLog::has_topic(const std::string& name) const {
  return topics_.contains(name);
}

const EventLog::Topic& EventLog::topic_or_throw(const std::string& name) const {
  const auto it = topics_.find(name);
  if (it == topics_.end()) throw ConfigError("unknown topic " + name);
  return it->second;
}

std::uint32_t EventLog::partition_count(const std::string& topic) const {
  return static_cast<std::uint32_t>(topic_or_throw(topic).partitions.size());
}

std::uint32_t EventLog::partition_for(const std::string& topic,
                                      ByteSpan key) const {
  const std::uint32_t count = partition_count(topic);
  // digest(key) mod count, folding the 256-bit digest byte by byte.
  const Hash256 h = digest(key);
  std::uint64_t rem = 0;
  for (std::uint8_t b : h.bytes) rem = (rem * 256 + b) % count;
  return static_cast<std::uint32_t>(rem);
}

std::pair<std::uint32_t, std::uint64_t> EventLog::append(
    const std::string& topic, ByteSpan key, ByteSpan value) {
  const std::uint32_t p = partition_for(topic, key);
  Topic& t = topics_.at(topic);
  auto& records = t.partitions[p];
  const std::uint64_t offset = records.size();
  records.push_back({offset, Bytes(key.begin(), key.end()),
                     Bytes(value.begin(), value.end())});
  t.journal.emplace_back(p, offset);
  return {p, offset};
}

const std::vector<Record>& EventLog::records(const std::string& topic,
                                             std::uint32_t partition) const {
  const Topic& t = topic_or_throw(topic);
  if (partition >= t.partitions.size())
    throw ConfigError("unknown partition " + std::to_string(partition));
  return t.partitions[partition];
}

const std::vector<std::pair<std::uint32_t, std::uint64_t>>& EventLog::journal(
    const std::string& topic) const {
  return topic_or_throw(topic).journal;
}

void EventLog::dump_topic(const std::string& topic,
                          const std::filesystem::path& dir) const {
  const Topic& t = topic_or_throw(topic);
  for (std::size_t p = 0; p < t.partitions.size(); ++p) {
    std::vector<Bytes> frames;
    frames.reserve(t.partitions[p].size());
    for (const Record& r : t.partitions[p]) frames.push_back(r.value);
    write_plog(dir / (topic + "." + std::to_string(p) + ".plog"), frames);
  }
}

void EventLog::restore_topic(const std::string& topic, std::uint32_t partitions,
                             const std::filesystem::path& dir) {
  create_topic(topic, partitions);
  Topic& t = topics_.at(topic);
  for (std::uint32_t p = 0; p < partitions; ++p) {
    const auto path = dir / (topic + "." + std::to_string(p) + ".plog");
    if (!std::filesystem::exists(path)) continue;
    for (auto& value : read_plog(path)) {
      const std::uint64_t offset = t.partitions[p].size();
      t.partitions[p].push_back({offset, {}, std::move(value)});
      t.journal.emplace_back(p, offset);
    }
  }
}

DeliveryStream::DeliveryStream(const EventLog& log, std::string topic,
                               std::vector<std::uint32_t> partitions,
                               FaultProfile profile)
    : log_(&log),
      topic_(std::move(topic)),
      partitions_(std::move(partitions)),
      profile_(profile),
      rng_(profile.seed) {
  profile_.validate();
  const std::uint32_t count = log.partition_count(topic_);
  for (std::uint32_t p : partitions_)
    if (p >= count) throw ConfigError("unknown partition " + std::to_string(p));
}

void DeliveryStream::refresh() {
  const auto& journal = log_->journal(topic_);
  for (; journal_seen_ < journal.size(); ++journal_seen_) {
    const auto& entry = journal[journal_seen_];
    if (std::ranges::find(partitions_, entry.first) != partitions_.end())
      order_.push_back(entry);
  }
  emitted_.resize(order_.size(), false);
}

std::optional<Delivery> DeliveryStream::next(
    std::optional<std::uint64_t> limit) {
  refresh();
  const std::uint64_t visible =
      std::min<std::uint64_t>(order_.size(), limit.value_or(order_.size()));
  if (lowest_unemitted_ >= visible) return std::nullopt;

  std::uint64_t pos;
  bool duplicate = false;
  if (!history_.empty() && rng_.chance(profile_.duplicate_probability)) {
    pos = history_[rng_.below(history_.size())];
    duplicate = true;
  } else {
    // Fresh pick, uniform over the unemitted part of the window.
    std::vector<std::uint64_t> candidates;
    const std::uint64_t hi = std::min<std::uint64_t>(
        visible - 1, lowest_unemitted_ + profile_.max_reorder_distance);
    for (std::uint64_t p = lowest_unemitted_; p <= hi; ++p)
      if (!emitted_[p]) candidates.push_back(p);
    pos = candidates[rng_.below(candidates.size())];
    emitted_[pos] = true;
    const std::uint64_t displacement =
        pos > fresh_count_ ? pos - fresh_count_ : fresh_count_ - pos;
    stats_.max_displacement = std::max(stats_.max_displacement, displacement);
    ++fresh_count_;
    history_.push_back(pos);
    while (lowest_unemitted_ < emitted_.size() && emitted_[lowest_unemitted_])
      ++lowest_unemitted_;
  }

  ++stats_.deliveries;
  if (duplicate) ++stats_.duplicates;
  const auto [partition, offset] = order_[pos];
  return Delivery{log_->records(topic_, partition)[offset], pos, duplicate};
}

bool DeliveryStream::exhausted() const {
  const auto& journal = log_->journal(topic_);
  std::uint64_t total = order_.size();
  for (std::size_t i = journal_seen_; i < journal.size(); ++i)
    if (std::ranges::find(partitions_, journal[i].first) != partitions_.end())
      ++total;
  return lowest_unemitted_ >= total;
}

}  // namespace parsec
