#pragma once

#include <ostream>

namespace rfr {

/// Exit codes: 0 ok, 1 invalid config or usage, 2 runtime failure,
/// 3 run ended in a safe stop (outputs are still written).
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rfr
