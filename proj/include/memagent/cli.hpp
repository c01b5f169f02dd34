#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace memagent {

// Entry point of the `memagent` tool. `args` excludes the program name.
// Subcommands: ingest | ask | repl | eval | serve. Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace memagent
