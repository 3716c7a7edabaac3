#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace berd::cli {

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> args);

  void set_config(nlohmann::ordered_json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_artifact(const std::string& role, const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> args_;
  nlohmann::ordered_json config_;
  std::uint64_t seed_ = 0;
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::array();
  std::vector<std::pair<std::string, std::filesystem::path>> artifacts_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace berd::cli
