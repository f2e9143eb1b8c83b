#pragma once

#include <set>
#include <string>
#include <vector>

namespace t2v {

// Every configuration key the command surface accepts, each consumed by
// exactly one documented parameter. Exposed for tests and --help.
const std::set<std::string>& cli_known_keys();

// Dispatches one subcommand; args exclude the program name. Returns the
// process exit code: 0 success, 1 usage/config/runtime failure, 2 missing
// stage dependency.
int run_cli(const std::vector<std::string>& args);

}  // namespace t2v
