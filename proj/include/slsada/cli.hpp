#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace slsada {

/// Reads key=value lines (# starts a comment) into "--key=value" tokens.
/// A bare key becomes "--key".
std::vector<std::string> read_config_file(const std::filesystem::path& path);

/// Inserts the tokens of every --config file right after the subcommand, so
/// that flags given on the command line take precedence.
std::vector<std::string> expand_config_args(const std::vector<std::string>& args);

/// Subcommands: run, protocol, sweep, synth, selfcheck. `args[0]` is the
/// program name. Returns 0 on success, 2 usage error, 3 data error,
/// 4 numerical failure.
int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out,
                       std::ostream& err);
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace slsada
