#include "berd/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "berd/errors.hpp"
#include "berd/log.hpp"

namespace berd {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view EventInstance::role_of(const std::string& entity_id) const {
  auto it = roles.find(entity_id);
  return it == roles.end() ? kNoRole : std::string_view(it->second);
}

LabelVocabulary::LabelVocabulary(std::vector<std::string> labels) {
  for (auto& l : labels) add(l);
}

int LabelVocabulary::add(const std::string& label) {
  if (auto it = index_.find(label); it != index_.end()) return it->second;
  const int id = static_cast<int>(labels_.size());
  labels_.push_back(label);
  index_.emplace(label, id);
  return id;
}

std::optional<int> LabelVocabulary::find(std::string_view label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int LabelVocabulary::id_of(std::string_view label) const {
  auto id = find(label);
  if (!id) throw ValidationError("unknown label '" + std::string(label) + "'");
  return *id;
}

void validate_record(const SentenceRecord& record) {
  const std::string& rid = record.sentence.id;
  auto fail = [&](const std::string& what) {
    throw ValidationError("record '" + rid + "': " + what);
  };
  if (rid.empty()) throw ValidationError("record with empty id");
  const std::size_t n = record.sentence.tokens.size();
  if (n == 0) fail("sentence has no tokens");

  std::set<std::string> ids;
  for (const auto& e : record.entities) {
    if (e.id.empty()) fail("entity with empty id");
    if (!ids.insert(e.id).second) fail("duplicate entity id '" + e.id + "'");
    if (!(e.start < e.end && e.end <= n)) {
      fail("entity '" + e.id + "' span [" + std::to_string(e.start) + ", " +
           std::to_string(e.end) + ") outside sentence of " + std::to_string(n) + " tokens");
    }
  }
  for (std::size_t i = 0; i < record.events.size(); ++i) {
    const auto& ev = record.events[i];
    if (!(ev.trigger_start < ev.trigger_end && ev.trigger_end <= n)) {
      fail("event " + std::to_string(i) + " trigger span [" + std::to_string(ev.trigger_start) +
           ", " + std::to_string(ev.trigger_end) + ") outside sentence of " + std::to_string(n) +
           " tokens");
    }
    for (const auto& [entity, role] : ev.roles) {
      if (!ids.contains(entity)) {
        fail("event " + std::to_string(i) + " assigns a role to undeclared entity '" + entity +
             "'");
      }
      if (role.empty()) fail("event " + std::to_string(i) + " has an empty role label");
    }
  }
}

Corpus::Corpus(std::vector<SentenceRecord> records) : records_(std::move(records)) {
  std::set<std::string> roles, event_types, entity_types;
  for (const auto& r : records_) {
    validate_record(r);
    for (const auto& e : r.entities) {
      if (!e.entity_type.empty()) entity_types.insert(e.entity_type);
    }
    for (const auto& ev : r.events) {
      if (!ev.event_type.empty()) event_types.insert(ev.event_type);
      for (const auto& [entity, role] : ev.roles) roles.insert(role);
    }
  }
  roles_.add(std::string(kNoRole));
  for (const auto& r : roles) roles_.add(r);
  for (const auto& t : event_types) event_types_.add(t);
  for (const auto& t : entity_types) entity_types_.add(t);
}

std::size_t Corpus::event_count() const {
  std::size_t n = 0;
  for (const auto& r : records_) n += r.events.size();
  return n;
}

std::vector<EventRef> Corpus::events() const {
  std::vector<EventRef> out;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    for (std::size_t j = 0; j < records_[i].events.size(); ++j) out.push_back({i, j});
  }
  return out;
}

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                std::string_view what, SchemaMode mode, std::string_view where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
    const std::string msg = std::string(where) + ": unknown field '" + key + "' in " +
                            std::string(what);
    if (mode == SchemaMode::kStrict) throw ParseError(msg);
    log::warn(msg + " (ignored)");
  }
}

template <typename V>
V required(const json& obj, const char* key, std::string_view where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(std::string(where) + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ParseError(std::string(where) + ": field '" + key + "': " + e.what());
  }
}

std::size_t required_index(const json& obj, const char* key, std::string_view where) {
  const auto v = required<long long>(obj, key, where);
  if (v < 0) throw ParseError(std::string(where) + ": field '" + key + "' is negative");
  return static_cast<std::size_t>(v);
}

SentenceRecord parse_record(const json& j, SchemaMode mode, std::string_view where) {
  if (!j.is_object()) throw ParseError(std::string(where) + ": record is not a JSON object");
  check_keys(j, {"id", "tokens", "entities", "events"}, "sentence record", mode, where);
  SentenceRecord r;
  r.sentence.id = required<std::string>(j, "id", where);
  r.sentence.tokens = required<std::vector<std::string>>(j, "tokens", where);
  if (j.contains("entities")) {
    if (!j["entities"].is_array()) throw ParseError(std::string(where) + ": 'entities' not a list");
    for (const auto& e : j["entities"]) {
      check_keys(e, {"id", "start", "end", "type"}, "entity", mode, where);
      EntityMention m;
      m.id = required<std::string>(e, "id", where);
      m.start = required_index(e, "start", where);
      m.end = required_index(e, "end", where);
      m.entity_type = e.contains("type") ? required<std::string>(e, "type", where) : "";
      r.entities.push_back(std::move(m));
    }
  }
  if (j.contains("events")) {
    if (!j["events"].is_array()) throw ParseError(std::string(where) + ": 'events' not a list");
    for (const auto& e : j["events"]) {
      check_keys(e, {"trigger_start", "trigger_end", "type", "roles"}, "event", mode, where);
      EventInstance ev;
      ev.trigger_start = required_index(e, "trigger_start", where);
      ev.trigger_end = required_index(e, "trigger_end", where);
      ev.event_type = required<std::string>(e, "type", where);
      if (e.contains("roles")) {
        ev.roles = required<std::map<std::string, std::string>>(e, "roles", where);
      }
      r.events.push_back(std::move(ev));
    }
  }
  return r;
}

}  // namespace

Corpus read_corpus(std::istream& in, SchemaMode mode, std::string_view source) {
  std::vector<SentenceRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    SentenceRecord r = parse_record(j, mode, where);
    try {
      validate_record(r);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    records.push_back(std::move(r));
  }
  return Corpus(std::move(records));
}

Corpus load_corpus(const std::filesystem::path& path, SchemaMode mode) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file " + path.string());
  return read_corpus(in, mode, path.string());
}

std::string record_to_json(const SentenceRecord& r) {
  ordered_json j;
  j["id"] = r.sentence.id;
  j["tokens"] = r.sentence.tokens;
  j["entities"] = ordered_json::array();
  for (const auto& e : r.entities) {
    j["entities"].push_back({{"id", e.id}, {"start", e.start}, {"end", e.end},
                             {"type", e.entity_type}});
  }
  j["events"] = ordered_json::array();
  for (const auto& ev : r.events) {
    ordered_json roles = ordered_json::object();
    for (const auto& [entity, role] : ev.roles) roles[entity] = role;
    j["events"].push_back({{"trigger_start", ev.trigger_start},
                           {"trigger_end", ev.trigger_end},
                           {"type", ev.event_type},
                           {"roles", roles}});
  }
  return j.dump();
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& r : corpus.records()) out << record_to_json(r) << '\n';
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write corpus file " + path.string());
  write_corpus(corpus, out);
}

std::vector<EntityMention> order_entities(std::vector<EntityMention> entities) {
  std::sort(entities.begin(), entities.end(), [](const EntityMention& a, const EntityMention& b) {
    return std::tie(a.start, a.end, a.id) < std::tie(b.start, b.end, b.id);
  });
  return entities;
}

RoleSequence gold_role_sequence(const SentenceRecord& record, const EventInstance& event) {
  RoleSequence out;
  for (const auto& e : order_entities(record.entities)) {
    out.push_back({e.id, std::string(event.role_of(e.id))});
  }
  return out;
}

bool has_overlapping_entities(const std::vector<EntityMention>& entities) {
  for (std::size_t i = 0; i < entities.size(); ++i) {
    for (std::size_t j = i + 1; j < entities.size(); ++j) {
      if (entities[i].overlaps(entities[j])) return true;
    }
  }
  return false;
}

std::optional<std::size_t> entity_count_bucket(std::size_t k) {
  if (k == 0) return std::nullopt;
  return std::min<std::size_t>((k - 1) / 3, kBucketCount - 1);
}

std::string bucket_label(std::size_t bucket) {
  static const char* kLabels[kBucketCount] = {"[1,3]", "[4,6]", "[7,9]", "[10,inf)"};
  return kLabels[bucket];
}

EntityCountBuckets bucket_by_entity_count(const Corpus& corpus) {
  EntityCountBuckets out;
  for (const auto& ref : corpus.events()) {
    if (auto b = entity_count_bucket(corpus.record(ref).entities.size())) {
      out.buckets[*b].push_back(ref);
    } else {
      ++out.zero_entity_events;
    }
  }
  return out;
}

OverlapSplit split_by_overlap(const Corpus& corpus) {
  OverlapSplit out;
  for (const auto& ref : corpus.events()) {
    if (has_overlapping_entities(corpus.record(ref).entities)) {
      out.overlapping.push_back(ref);
    } else {
      out.non_overlapping.push_back(ref);
    }
  }
  return out;
}

}  // namespace berd
