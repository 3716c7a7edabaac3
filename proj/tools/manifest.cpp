#include "manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>

#include "berd/errors.hpp"

namespace berd::cli {

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

Manifest::Manifest(std::string command, std::vector<std::string> args)
    : command_(std::move(command)), args_(std::move(args)) {}

void Manifest::add_input(const std::string& role, const std::filesystem::path& path) {
  inputs_.push_back({{"role", role}, {"path", path.string()}, {"fnv1a64", file_digest(path)}});
}

void Manifest::add_artifact(const std::string& role, const std::filesystem::path& path) {
  artifacts_.emplace_back(role, path);
}

void Manifest::write(const std::filesystem::path& path) const {
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  char stamp[32];
  const std::time_t now = std::time(nullptr);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));

  nlohmann::ordered_json j;
  j["command"] = command_;
  j["args"] = args_;
  j["seed"] = seed_;
  j["config"] = config_;
  j["inputs"] = inputs_;
  auto artifacts = nlohmann::ordered_json::array();
  for (const auto& [role, p] : artifacts_) {
    artifacts.push_back({{"role", role}, {"path", p.string()}, {"fnv1a64", file_digest(p)}});
  }
  j["artifacts"] = artifacts;
  j["finished_at"] = stamp;
  j["wall_clock_seconds"] = seconds;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace berd::cli
