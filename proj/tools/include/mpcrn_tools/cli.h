// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mpcrn::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

// Runs the command line `args` (without the program name). JSON reports go to
// `out`, human-readable progress and errors to `err`. The stream command
// reads raw PCM16 from `in` and writes raw PCM16 to `out` instead.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

// --seed when given, else MPCRN_SEED, else 0. A malformed MPCRN_SEED throws
// InvalidInput.
std::uint64_t resolve_seed(const std::string& flag_value);

}  // namespace mpcrn::tools
