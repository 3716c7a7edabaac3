#include "berd/synthetic.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "berd/errors.hpp"

namespace berd {
namespace {

using Rng = std::mt19937_64;

// Modulo reduction: bias is below 2^-50 for the small ranges used here, and
// unlike std::uniform_int_distribution the sequence is library independent.
std::size_t uniform_index(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }
double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
std::size_t uniform_range(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + uniform_index(rng, hi - lo + 1);
}

enum class Kind { kLocation, kPerson, kDirect, kDistractor };

constexpr std::array<const char*, 3> kLocationChain = {"Destination", "Origin", "Place"};
constexpr std::array<const char*, 3> kPersonChain = {"Attacker", "Target", "Victim"};
constexpr std::array<const char*, 4> kDirectRoles = {"Instrument", "Time", "Artifact", "Agent"};
constexpr std::array<const char*, 4> kDirectTypes = {"WEA", "TIME", "VEH", "ORG"};
constexpr std::array<const char*, 5> kEventTypeNames = {"Attack", "Transport", "Meet", "Die",
                                                        "Marry"};
constexpr std::size_t kAmbiguousHeads = 8;
constexpr std::size_t kCueHeads = 3;
constexpr std::size_t kDirectHeads = 3;
constexpr std::size_t kDistractorHeads = 10;
constexpr std::size_t kModifierHeads = 4;
constexpr std::size_t kTriggerWords = 3;

struct Item {
  Kind kind = Kind::kDistractor;
  bool bearer = false;      // carries a role
  bool forced = false;      // placed for a mandatory role
  bool cluster = false;
  bool outer_bears = true;  // which cluster member carries the role
  std::size_t direct_class = 0;
  std::string role = std::string(kNoRole);
  std::size_t start = 0;  // first token of the item
};

template <std::size_t N>
int index_of(const std::array<const char*, N>& names, const std::string& role) {
  for (std::size_t i = 0; i < N; ++i) {
    if (role == names[i]) return static_cast<int>(i);
  }
  return -1;
}

struct MandatoryPlan {
  std::size_t location = 0;  // role-bearing location mentions required
  std::size_t person = 0;
  std::vector<std::size_t> direct_roles;
};

MandatoryPlan plan_mandatory(const SyntheticProfile& p) {
  MandatoryPlan plan;
  for (const auto& role : p.mandatory_roles) {
    if (int i = index_of(kLocationChain, role); i >= 0) {
      plan.location = std::max(plan.location, static_cast<std::size_t>(i) + 1);
    } else if (int j = index_of(kPersonChain, role); j >= 0) {
      plan.person = std::max(plan.person, static_cast<std::size_t>(j) + 1);
    } else if (int d = index_of(kDirectRoles, role); d >= 0) {
      plan.direct_roles.push_back(static_cast<std::size_t>(d));
    } else {
      throw GenerationError("unknown mandatory role '" + role + "'");
    }
  }
  return plan;
}

Kind sample_kind(const SyntheticProfile& p, Rng& rng) {
  const double total =
      p.location_weight + p.person_weight + p.direct_weight + p.distractor_weight;
  double u = uniform01(rng) * total;
  if ((u -= p.location_weight) < 0) return Kind::kLocation;
  if ((u -= p.person_weight) < 0) return Kind::kPerson;
  if ((u -= p.direct_weight) < 0) return Kind::kDirect;
  return Kind::kDistractor;
}

std::string head_word(const Item& item, bool cued, Rng& rng) {
  const auto pick = [&](std::size_t n) { return std::to_string(uniform_index(rng, n)); };
  switch (item.kind) {
    case Kind::kLocation:
    case Kind::kPerson: {
      const std::string cls = item.kind == Kind::kLocation ? "loc" : "per";
      if (cued && item.bearer) {
        std::string role = item.role;
        std::transform(role.begin(), role.end(), role.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return role + "_" + pick(kCueHeads);
      }
      return cls + pick(kAmbiguousHeads);
    }
    case Kind::kDirect:
      return "dir" + std::to_string(item.direct_class) + "_" + pick(kDirectHeads);
    case Kind::kDistractor:
      return "misc" + pick(kDistractorHeads);
  }
  return "?";
}

std::string entity_type(const Item& item) {
  switch (item.kind) {
    case Kind::kLocation: return "LOC";
    case Kind::kPerson: return "PER";
    case Kind::kDirect: return kDirectTypes[item.direct_class];
    case Kind::kDistractor: return "MISC";
  }
  return "MISC";
}

void assign_chain_roles(std::vector<Item*>& bearers, const std::array<const char*, 3>& chain,
                        bool from_right, const SyntheticProfile& p, Rng& rng) {
  if (p.contextual) {
    const std::size_t m = bearers.size();
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t rank = from_right ? m - 1 - i : i;
      bearers[i]->role = chain[std::min<std::size_t>(rank, 2)];
    }
    return;
  }
  // Forced mentions stand for the chain-initial role (check_profile allows
  // at most one per chain here).
  bool used[2] = {false, false};
  for (Item* b : bearers) {
    if (b->forced) {
      b->role = chain[0];
      used[0] = true;
    }
  }
  for (Item* b : bearers) {
    if (b->forced) continue;
    std::vector<std::size_t> allowed;
    for (std::size_t r = 0; r < 3; ++r) {
      if (r < 2 && p.unique_roles && used[r]) continue;
      allowed.push_back(r);
    }
    const std::size_t r = allowed[uniform_index(rng, allowed.size())];
    if (r < 2) used[r] = true;
    b->role = chain[r];
  }
}

SentenceRecord generate_record(const SyntheticProfile& p, const MandatoryPlan& plan,
                               std::uint64_t seed, std::size_t index, Rng& rng) {
  const std::size_t type = uniform_index(rng, p.event_type_count);
  const std::size_t k = uniform_range(rng, p.entity_min, p.entity_max);

  std::vector<Item> items;
  std::size_t mentions = 0;
  auto push = [&](Item item) {
    mentions += item.cluster ? 2 : 1;
    items.push_back(std::move(item));
  };
  for (std::size_t i = 0; i < plan.location; ++i) {
    push(Item{.kind = Kind::kLocation, .bearer = true, .forced = true});
  }
  for (std::size_t i = 0; i < plan.person; ++i) {
    push(Item{.kind = Kind::kPerson, .bearer = true, .forced = true});
  }
  for (std::size_t d : plan.direct_roles) {
    Item item{.kind = Kind::kDirect, .bearer = true, .forced = true};
    item.direct_class = (d + kDirectRoles.size() - type % kDirectRoles.size()) % kDirectRoles.size();
    push(std::move(item));
  }

  const bool want_cluster = p.overlap && k >= mentions + 2 && uniform01(rng) < p.overlap_probability;
  if (want_cluster) {
    Item item;
    const double u = uniform01(rng) * (p.location_weight + p.person_weight + p.direct_weight);
    item.kind = u < p.location_weight                     ? Kind::kLocation
                : u < p.location_weight + p.person_weight ? Kind::kPerson
                                                          : Kind::kDirect;
    item.bearer = true;
    item.cluster = true;
    item.outer_bears = uniform01(rng) < 0.5;
    push(std::move(item));
  }
  while (mentions < k) {
    Item item;
    item.kind = sample_kind(p, rng);
    item.bearer = item.kind != Kind::kDistractor;
    push(std::move(item));
  }

  for (auto& item : items) {
    if (item.kind == Kind::kDirect && !item.forced) {
      item.direct_class = uniform_index(rng, kDirectRoles.size());
    }
    if ((item.kind == Kind::kLocation || item.kind == Kind::kPerson) && !item.forced &&
        !item.cluster && uniform01(rng) < p.random_non_argument) {
      item.bearer = false;
    }
  }

  // Random surface order, trigger included as an extra slot.
  std::vector<std::size_t> order(items.size() + 1);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  auto filler = [&]() { return "w" + std::to_string(uniform_index(rng, p.filler_vocab)); };
  std::vector<std::string> tokens;
  std::size_t trigger_pos = 0;
  if (uniform01(rng) < 0.5) tokens.push_back(filler());
  for (std::size_t slot = 0; slot < order.size(); ++slot) {
    if (slot > 0) {
      const std::size_t gap = uniform_range(rng, p.gap_min, p.gap_max);
      for (std::size_t g = 0; g < gap; ++g) tokens.push_back(filler());
    }
    if (order[slot] == items.size()) {
      trigger_pos = tokens.size();
      tokens.push_back("trig" + std::to_string(type) + "_" +
                       std::to_string(uniform_index(rng, kTriggerWords)));
    } else {
      Item& item = items[order[slot]];
      item.start = tokens.size();
      tokens.emplace_back();  // head (and modifier) filled in after roles are known
      if (item.cluster) tokens.emplace_back();
    }
  }
  if (uniform01(rng) < 0.5) tokens.push_back(filler());

  // Roles.
  std::vector<Item*> by_position;
  for (auto& item : items) by_position.push_back(&item);
  std::sort(by_position.begin(), by_position.end(),
            [](const Item* a, const Item* b) { return a->start < b->start; });
  std::vector<Item*> loc_bearers, per_bearers;
  for (Item* item : by_position) {
    if (!item->bearer) continue;
    if (item->kind == Kind::kLocation) loc_bearers.push_back(item);
    if (item->kind == Kind::kPerson) per_bearers.push_back(item);
    if (item->kind == Kind::kDirect) {
      item->role = kDirectRoles[(item->direct_class + type) % kDirectRoles.size()];
    }
  }
  assign_chain_roles(loc_bearers, kLocationChain, false, p, rng);
  assign_chain_roles(per_bearers, kPersonChain, true, p, rng);

  // Surface words and mentions.
  struct Mention {
    std::size_t start, end;
    std::string type, role;
  };
  std::vector<Mention> found;
  for (Item* item : by_position) {
    const bool cued = !p.contextual || uniform01(rng) < p.cue_strength;
    if (item->cluster) {
      tokens[item->start] = (item->outer_bears ? "the" : "adj") +
                            std::to_string(uniform_index(rng, kModifierHeads));
      tokens[item->start + 1] = head_word(*item, cued, rng);
      const std::string type_name = entity_type(*item);
      const std::string outer_role = item->outer_bears ? item->role : std::string(kNoRole);
      const std::string inner_role = item->outer_bears ? std::string(kNoRole) : item->role;
      found.push_back({item->start, item->start + 2, type_name, outer_role});
      found.push_back({item->start + 1, item->start + 2, type_name, inner_role});
    } else {
      tokens[item->start] = head_word(*item, cued, rng);
      found.push_back({item->start, item->start + 1, entity_type(*item), item->role});
    }
  }
  std::sort(found.begin(), found.end(), [](const Mention& a, const Mention& b) {
    return std::tie(a.start, a.end) < std::tie(b.start, b.end);
  });

  SentenceRecord record;
  std::ostringstream id;
  id << "syn-" << seed << "-" << index;
  record.sentence.id = id.str();
  record.sentence.tokens = std::move(tokens);
  EventInstance event;
  event.trigger_start = trigger_pos;
  event.trigger_end = trigger_pos + 1;
  event.event_type = synthetic_event_types(p.event_type_count)[type];
  for (std::size_t i = 0; i < found.size(); ++i) {
    // zero-padded so lexicographic id order agrees with position order
    std::ostringstream eid;
    eid << "e" << (i < 10 ? "0" : "") << i;
    record.entities.push_back({eid.str(), found[i].start, found[i].end, found[i].type});
    if (found[i].role != kNoRole) event.roles[eid.str()] = found[i].role;
  }
  record.events.push_back(std::move(event));
  return record;
}

}  // namespace

std::vector<std::string> synthetic_unique_roles() {
  return {"Destination", "Origin", "Attacker", "Target"};
}

std::vector<std::string> synthetic_event_types(std::size_t count) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(i < kEventTypeNames.size() ? std::string(kEventTypeNames[i])
                                             : "Type" + std::to_string(i));
  }
  return out;
}

std::vector<std::string> synthetic_roles() {
  std::vector<std::string> out;
  for (const char* r : kLocationChain) out.emplace_back(r);
  for (const char* r : kPersonChain) out.emplace_back(r);
  for (const char* r : kDirectRoles) out.emplace_back(r);
  return out;
}

SyntheticProfile builtin_profile(const std::string& name) {
  SyntheticProfile p;
  p.name = name;
  if (name == "default") return p;
  if (name == "unique-role") {
    p.contextual = false;
    p.overlap = false;
    return p;
  }
  if (name == "overlap") {
    p.overlap_probability = 1.0;
    return p;
  }
  if (name == "toy") {
    p.event_count = 50;
    p.entity_min = 2;
    p.entity_max = 5;
    p.filler_vocab = 30;
    return p;
  }
  if (name == "acceptance") {
    p.event_count = 2000;
    return p;
  }
  throw GenerationError("unknown synthetic profile '" + name + "'");
}

std::vector<std::string> builtin_profile_names() {
  return {"default", "unique-role", "overlap", "toy", "acceptance"};
}

namespace {

nlohmann::json profile_json(const SyntheticProfile& p) {
  return {{"name", p.name},
          {"event_count", p.event_count},
          {"event_type_count", p.event_type_count},
          {"filler_vocab", p.filler_vocab},
          {"entity_min", p.entity_min},
          {"entity_max", p.entity_max},
          {"gap_min", p.gap_min},
          {"gap_max", p.gap_max},
          {"unique_roles", p.unique_roles},
          {"overlap", p.overlap},
          {"contextual", p.contextual},
          {"overlap_probability", p.overlap_probability},
          {"cue_strength", p.cue_strength},
          {"random_non_argument", p.random_non_argument},
          {"location_weight", p.location_weight},
          {"person_weight", p.person_weight},
          {"direct_weight", p.direct_weight},
          {"distractor_weight", p.distractor_weight},
          {"mandatory_roles", p.mandatory_roles}};
}

}  // namespace

SyntheticProfile profile_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("profile: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("profile: expected a JSON object");
  SyntheticProfile p;
  const nlohmann::json defaults = profile_json(p);
  for (const auto& [key, _] : j.items()) {
    if (!defaults.contains(key)) throw ParseError("profile: unknown key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("name", p.name);
    get("event_count", p.event_count);
    get("event_type_count", p.event_type_count);
    get("filler_vocab", p.filler_vocab);
    get("entity_min", p.entity_min);
    get("entity_max", p.entity_max);
    get("gap_min", p.gap_min);
    get("gap_max", p.gap_max);
    get("unique_roles", p.unique_roles);
    get("overlap", p.overlap);
    get("contextual", p.contextual);
    get("overlap_probability", p.overlap_probability);
    get("cue_strength", p.cue_strength);
    get("random_non_argument", p.random_non_argument);
    get("location_weight", p.location_weight);
    get("person_weight", p.person_weight);
    get("direct_weight", p.direct_weight);
    get("distractor_weight", p.distractor_weight);
    get("mandatory_roles", p.mandatory_roles);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("profile: ") + e.what());
  }
  return p;
}

std::string profile_to_json(const SyntheticProfile& profile) {
  return profile_json(profile).dump(2);
}

SyntheticProfile resolve_profile(const std::string& name_or_path) {
  const auto names = builtin_profile_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    return builtin_profile(name_or_path);
  }
  std::ifstream in(name_or_path);
  if (!in) throw GenerationError("'" + name_or_path + "' is neither a built-in profile nor a file");
  std::stringstream buf;
  buf << in.rdbuf();
  return profile_from_json(buf.str());
}

void check_profile(const SyntheticProfile& p) {
  auto fail = [&](const std::string& what) {
    throw GenerationError("profile '" + p.name + "': " + what);
  };
  if (p.event_type_count == 0) fail("event_type_count must be positive");
  if (p.filler_vocab == 0) fail("filler_vocab must be positive");
  if (p.entity_min > p.entity_max) fail("entity_min exceeds entity_max");
  if (p.gap_min > p.gap_max) fail("gap_min exceeds gap_max");
  for (double prob : {p.overlap_probability, p.cue_strength, p.random_non_argument}) {
    if (!(prob >= 0.0 && prob <= 1.0)) fail("probabilities must lie in [0, 1]");
  }
  for (double w : {p.location_weight, p.person_weight, p.direct_weight, p.distractor_weight}) {
    if (!(w >= 0.0)) fail("mention weights must be non-negative");
  }
  if (p.location_weight + p.person_weight + p.direct_weight + p.distractor_weight <= 0.0) {
    fail("mention weights sum to zero");
  }
  if (p.overlap && p.overlap_probability > 0.0 &&
      p.location_weight + p.person_weight + p.direct_weight <= 0.0) {
    fail("overlap clusters need an argument-bearing mention kind");
  }
  MandatoryPlan plan;
  try {
    plan = plan_mandatory(p);
  } catch (const GenerationError& e) {
    fail(e.what());
  }
  if (!p.contextual && (plan.location > 1 || plan.person > 1)) {
    fail("without the contextual rule only chain-initial roles can be mandatory");
  }
  const std::size_t required = plan.location + plan.person + plan.direct_roles.size();
  if (required > p.entity_min) {
    fail(std::to_string(required) + " mentions needed for mandatory roles but entity_min is " +
         std::to_string(p.entity_min));
  }
}

Corpus generate_synthetic(const SyntheticProfile& profile, std::uint64_t seed) {
  check_profile(profile);
  const MandatoryPlan plan = plan_mandatory(profile);
  Rng rng(seed);
  std::vector<SentenceRecord> records;
  records.reserve(profile.event_count);
  for (std::size_t i = 0; i < profile.event_count; ++i) {
    records.push_back(generate_record(profile, plan, seed, i, rng));
  }
  return Corpus(std::move(records));
}

}  // namespace berd
