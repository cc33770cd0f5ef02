#include "prfrl/log.h"

#include <atomic>

namespace prfrl::log {
namespace {
std::atomic<Level> current{Level::kWarning};
}  // namespace

Level level() { return current.load(std::memory_order_relaxed); }
void set_level(Level level) { current.store(level, std::memory_order_relaxed); }

}  // namespace prfrl::log
