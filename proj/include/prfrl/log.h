#pragma once

#include <fmt/core.h>

#include <cstdio>
#include <utility>

namespace prfrl::log {

enum class Level { kQuiet = 0, kWarning = 1, kInfo = 2 };

Level level();
void set_level(Level level);

template <typename... Args>
void warning(fmt::format_string<Args...> format, Args&&... args) {
  if (level() >= Level::kWarning) {
    fmt::print(stderr, "warning: {}\n",
               fmt::format(format, std::forward<Args>(args)...));
  }
}

template <typename... Args>
void info(fmt::format_string<Args...> format, Args&&... args) {
  if (level() >= Level::kInfo) {
    fmt::print(stderr, "{}\n", fmt::format(format, std::forward<Args>(args)...));
  }
}

}  // namespace prfrl::log
