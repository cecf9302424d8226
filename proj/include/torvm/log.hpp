#pragma once

#include <string>

namespace torvm {

// Warnings go to stderr unless silenced; a counter lets callers detect them.
void warn(const std::string& msg);
void set_warnings_enabled(bool on);
int warning_count();

}  // namespace torvm
