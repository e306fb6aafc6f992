#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace facecap {

// Exit codes: 0 all requested work done, 1 a stage failed (partial output
// stays resumable), 2 bad usage or invalid configuration. Errors are also
// written to `err` as one JSON object per line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace facecap
