// log.hpp: minimal diagnostic sink
//
// Numerical corrections (re-Hermitization, entropy regularization, boundary
// flux) are reported here so drift is visible. The default sink prints
// warnings to stderr and drops debug messages.

#pragma once

#include <functional>
#include <string_view>

namespace qengine::log {

enum class Level { Debug, Warning };

using Sink = std::function<void(Level, std::string_view)>;

// Replaces the process-wide sink. Pass an empty function to silence all output.
void set_sink(Sink sink);

void debug(std::string_view message);
void warn(std::string_view message);

}  // namespace qengine::log
