#pragma once

#include <cstdint>
#include <string_view>

namespace berd::log {

enum class Level { kQuiet, kWarn, kInfo };

void set_level(Level level);
Level level();

void warn(std::string_view message);
void info(std::string_view message);

// Number of warnings emitted since start (or the last reset), including
// suppressed ones.
std::uint64_t warning_count();
void reset_warning_count();

}  // namespace berd::log
