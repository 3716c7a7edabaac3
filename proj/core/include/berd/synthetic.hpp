#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "berd/corpus.hpp"

namespace berd {

// Generator configuration. The role inventory is fixed (ten roles + N/A):
//
//   location chain  Destination, Origin, Place     resolved left to right
//   person chain    Attacker, Target, Victim       resolved right to left
//   direct          Instrument, Time, Artifact, Agent
//
// Pattern rules:
//   (a) unique_roles: Destination, Origin, Attacker and Target occur at most
//       once per event.
//   (b) overlap: some arguments are wrapped in a nested two-mention cluster
//       of which exactly one member carries the role; the modifier word
//       tells which one.
//   (c) contextual: chain roles depend on the roles of the other entities.
//       Among role-bearing location mentions in canonical order the first is
//       Destination, the second Origin, the rest Place. Among role-bearing
//       person mentions counted from the right the last is Attacker, the one
//       before it Target, the rest Victim. With probability cue_strength the
//       head word names the role directly; otherwise it only names the chain.
//       Without (c) chain roles are drawn at random and always cued.
struct SyntheticProfile {
  std::string name = "default";
  std::size_t event_count = 200;
  std::size_t event_type_count = 5;
  std::size_t filler_vocab = 200;
  std::size_t entity_min = 4;
  std::size_t entity_max = 10;
  std::size_t gap_min = 1;
  std::size_t gap_max = 2;

  bool unique_roles = true;
  bool overlap = true;
  bool contextual = true;
  double overlap_probability = 0.35;
  double cue_strength = 0.2;
  // Chain-class mentions that carry no role and no cue.
  double random_non_argument = 0.1;

  // Relative frequencies of mention kinds.
  double location_weight = 0.35;
  double person_weight = 0.35;
  double direct_weight = 0.2;
  double distractor_weight = 0.1;

  // Roles every event must contain.
  std::vector<std::string> mandatory_roles;

  bool operator==(const SyntheticProfile&) const = default;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Built-in profiles: default, unique-role, overlap, toy, acceptance.
SyntheticProfile builtin_profile(const std::string& name);
std::vector<std::string> builtin_profile_names();
// A built-in name or a path to a JSON file with the profile's keys.
SyntheticProfile resolve_profile(const std::string& name_or_path);
SyntheticProfile profile_from_json(const std::string& text);
std::string profile_to_json(const SyntheticProfile& profile);

// Throws GenerationError when the profile cannot be satisfied.
void check_profile(const SyntheticProfile& profile);

// Deterministic in (profile, seed).
Corpus generate_synthetic(const SyntheticProfile& profile, std::uint64_t seed);

// Roles designated unique per event by rule (a).
std::vector<std::string> synthetic_unique_roles();
std::vector<std::string> synthetic_event_types(std::size_t count);
std::vector<std::string> synthetic_roles();

}  // namespace berd
