#pragma once

// In-process partitioned append-only log with seeded at-least-once delivery.
// Stands in for a broker: records are durable, only consumption order and
// duplication vary. Not thread-safe; one owner at a time.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "parsec/bytes.hpp"
#include "parsec/protocol.hpp"
#include "parsec/rng.hpp"

namespace parsec {

enum class ControlKind : std::uint8_t {
  UNSCHEDULED_SETTLEMENT = 0,
  DISPUTED_SETTLEMENT = 1,
};
std::string_view control_kind_name(ControlKind k);

struct ControlMessage {
  std::string channel;
  ControlKind kind = ControlKind::UNSCHEDULED_SETTLEMENT;
  Address requester;

  bool operator==(const ControlMessage&) const = default;
};

Bytes encode_control(const ControlMessage& msg);
ControlMessage decode_control(ByteSpan bytes);

// A record value holds exactly one protocol message; dispatch on the tag.
using RecordValue = std::variant<SignedInvoice, ControlMessage>;
RecordValue decode_record_value(ByteSpan bytes);

struct Record {
  std::uint64_t offset = 0;
  Bytes key;
  Bytes value;
};

struct FaultProfile {
  std::uint64_t seed = 0;
  Rational duplicate_probability{0, 1};
  std::uint32_t max_reorder_distance = 0;
  Rational drop_probability{0, 1};  // must stay 0: the log never loses data

  void validate() const;  // throws ConfigError
};

struct DeliveryStats {
  std::uint64_t deliveries = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t max_displacement = 0;
};

struct Delivery {
  Record record;
  std::uint64_t log_position = 0;  // position in subscription order
  bool duplicate = false;
};

class EventLog {
 public:
  void create_topic(const std::string& name, std::uint32_t partitions);
  bool has_topic(const std::string& name) const;
  std::uint32_t partition_count(const std::string& topic) const;
  std::uint32_t partition_for(const std::string& topic, ByteSpan key) const;

  // Appends to partition digest(key) mod partition_count.
  std::pair<std::uint32_t, std::uint64_t> append(const std::string& topic,
                                                 ByteSpan key, ByteSpan value);

  const std::vector<Record>& records(const std::string& topic,
                                     std::uint32_t partition) const;
  // (partition, offset) pairs in topic-wide append order; this is the
  // canonical linearization streams subscribe against.
  const std::vector<std::pair<std::uint32_t, std::uint64_t>>& journal(
      const std::string& topic) const;

  // One file per partition: <topic>.<partition>.plog, value frames only.
  void dump_topic(const std::string& topic,
                  const std::filesystem::path& dir) const;
  // Recreates a topic from dumped files; restored records carry empty keys
  // (keys only matter at append time, for partition selection).
  void restore_topic(const std::string& topic, std::uint32_t partitions,
                     const std::filesystem::path& dir);

 private:
  struct Topic {
    std::vector<std::vector<Record>> partitions;
    std::vector<std::pair<std::uint32_t, std::uint64_t>> journal;
  };
  const Topic& topic_or_throw(const std::string& name) const;
  std::map<std::string, Topic> topics_;
};

// Pull-based consumer over a fixed partition set. Every record is delivered
// at least once; a fresh record is only picked from the window
// [u, u + max_reorder_distance], u being the lowest log position not yet
// delivered, which bounds both first-occurrence displacement and the
// sequence gap seen by consumers. Duplicates replay an already-delivered
// position. The schedule is a pure function of (log contents, profile):
// the RNG advances only when a fresh record is available, so polling an
// idle stream does not perturb it.
class DeliveryStream {
 public:
  DeliveryStream(const EventLog& log, std::string topic,
                 std::vector<std::uint32_t> partitions, FaultProfile profile);

  // `limit`: only the first `limit` records (subscription order) are
  // deliverable; the simulator uses this to gate availability per tick.
  std::optional<Delivery> next(
      std::optional<std::uint64_t> limit = std::nullopt);

  bool exhausted() const;  // every appended record delivered at least once
  std::uint64_t fresh_delivered() const { return fresh_count_; }
  const DeliveryStats& stats() const { return stats_; }

 private:
  void refresh();

  const EventLog* log_;
  std::string topic_;
  std::vector<std::uint32_t> partitions_;
  FaultProfile profile_;
  Rng rng_;

  // Subscription order: journal filtered to the subscribed partitions.
  std::vector<std::pair<std::uint32_t, std::uint64_t>> order_;
  std::size_t journal_seen_ = 0;
  std::vector<bool> emitted_;
  std::uint64_t lowest_unemitted_ = 0;
  std::uint64_t fresh_count_ = 0;
  std::vector<std::uint64_t> history_;
  DeliveryStats stats_;
};

}  // namespace parsec
