#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hvs::cli {

// Runs one command line (args excludes the program name). Returns the exit
// status: 0 on success, 1 on a runtime error, 2 on a usage error. Errors are
// a single "error: <kind>: <message>" line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hvs::cli
