#pragma once

#include <string_view>

namespace igt {

/// Writes "warning: <msg>" to stderr unless warnings are silenced.
void warn(std::string_view msg);
/// Returns the previous setting.
bool set_warnings_enabled(bool enabled);

}  // namespace igt
