#include "berd/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace berd::log {
namespace {

std::atomic<Level> g_level{Level::kWarn};
std::atomic<std::uint64_t> g_warnings{0};
std::mutex g_mutex;

}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void warn(std::string_view message) {
  ++g_warnings;
  if (g_level < Level::kWarn) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "[warn] " << message << '\n';
}

void info(std::string_view message) {
  if (g_level < Level::kInfo) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "[info] " << message << '\n';
}

std::uint64_t warning_count() { return g_warnings; }
void reset_warning_count() { g_warnings = 0; }

}  // namespace berd::log
