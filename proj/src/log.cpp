#include "igt/log.hpp"

#include <atomic>
#include <iostream>

namespace igt {

namespace {
std::atomic<bool> g_warnings{true};
}

void warn(std::string_view msg) {
  if (g_warnings.load()) std::cerr << "warning: " << msg << '\n';
}

bool set_warnings_enabled(bool enabled) { return g_warnings.exchange(enabled); }

}  // namespace igt
