#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tgom {

// Entry point of the command line tool. Returns the process exit code; errors
// are reported on `err` as one JSON record.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tgom
