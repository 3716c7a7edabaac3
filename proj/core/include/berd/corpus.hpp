#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace berd {

inline constexpr std::string_view kNoRole = "N/A";

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  bool operator==(const Sentence&) const = default;
};

// Token span [start, end), 0-based.
struct EntityMention {
  std::string id;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string entity_type;

  std::size_t last_token() const { return end - 1; }
  bool overlaps(const EntityMention& other) const {
    return start < other.end && other.start < end;
  }
  bool operator==(const EntityMention&) const = default;
};

struct EventInstance {
  std::size_t trigger_start = 0;
  std::size_t trigger_end = 0;
  std::string event_type;
  // entity id -> role label; absent entities play no role
  std::map<std::string, std::string> roles;

  std::size_t trigger_last_token() const { return trigger_end - 1; }
  std::string_view role_of(const std::string& entity_id) const;
  bool operator==(const EventInstance&) const = default;
};

struct SentenceRecord {
  Sentence sentence;
  std::vector<EntityMention> entities;
  std::vector<EventInstance> events;
  bool operator==(const SentenceRecord&) const = default;
};

struct RoleAssignment {
  std::string entity_id;
  std::string role;
  bool operator==(const RoleAssignment&) const = default;
};
using RoleSequence = std::vector<RoleAssignment>;

// Closed label set with stable ids.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::vector<std::string> labels);

  int add(const std::string& label);
  std::optional<int> find(std::string_view label) const;
  int id_of(std::string_view label) const;  // throws when absent
  const std::string& label(int id) const { return labels_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  bool operator==(const LabelVocabulary& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, int, std::less<>> index_;
};

// Identifies one event of a corpus.
struct EventRef {
  std::size_t record = 0;
  std::size_t event = 0;
  bool operator==(const EventRef&) const = default;
  auto operator<=>(const EventRef&) const = default;
};

// Validated records plus vocabularies closed over every label they use.
// The role vocabulary always holds N/A at id 0; the other vocabularies are
// sorted.
class Corpus {
 public:
  Corpus() : Corpus(std::vector<SentenceRecord>{}) {}
  // Validates every record; throws ValidationError naming the offending id.
  explicit Corpus(std::vector<SentenceRecord> records);

  const std::vector<SentenceRecord>& records() const { return records_; }
  const LabelVocabulary& roles() const { return roles_; }
  const LabelVocabulary& event_types() const { return event_types_; }
  const LabelVocabulary& entity_types() const { return entity_types_; }

  std::size_t event_count() const;
  std::vector<EventRef> events() const;
  const SentenceRecord& record(const EventRef& ref) const { return records_.at(ref.record); }
  const EventInstance& event(const EventRef& ref) const {
    return records_.at(ref.record).events.at(ref.event);
  }

  bool operator==(const Corpus& other) const { return records_ == other.records_; }

 private:
  std::vector<SentenceRecord> records_;
  LabelVocabulary roles_;
  LabelVocabulary event_types_;
  LabelVocabulary entity_types_;
};

void validate_record(const SentenceRecord& record);

enum class SchemaMode { kStrict, kLenient };

// JSONL, one sentence record per line. Blank lines are skipped. Errors carry
// the 1-based line number.
Corpus read_corpus(std::istream& in, SchemaMode mode = SchemaMode::kLenient,
                   std::string_view source = "<stream>");
Corpus load_corpus(const std::filesystem::path& path, SchemaMode mode = SchemaMode::kLenient);
void write_corpus(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

std::string record_to_json(const SentenceRecord& record);

// Canonical entity order: (start, end, id) ascending.
std::vector<EntityMention> order_entities(std::vector<EntityMention> entities);

// Gold roles in canonical entity order, N/A for entities without a role.
RoleSequence gold_role_sequence(const SentenceRecord& record, const EventInstance& event);

bool has_overlapping_entities(const std::vector<EntityMention>& entities);

// Entity-count buckets [1,3], [4,6], [7,9], [10,inf).
inline constexpr std::size_t kBucketCount = 4;
std::optional<std::size_t> entity_count_bucket(std::size_t entity_count);
std::string bucket_label(std::size_t bucket);

struct EntityCountBuckets {
  std::array<std::vector<EventRef>, kBucketCount> buckets;
  std::size_t zero_entity_events = 0;
};
EntityCountBuckets bucket_by_entity_count(const Corpus& corpus);

struct OverlapSplit {
  std::vector<EventRef> overlapping;      // Subset-O
  std::vector<EventRef> non_overlapping;  // Subset-N
};
OverlapSplit split_by_overlap(const Corpus& corpus);

}  // namespace berd
