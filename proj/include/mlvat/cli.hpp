#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mlvat {

// Subcommands: train, sweep, probe, gen-synth, inspect-store, report.
// args excludes the program name. Returns 0 on success, 1 on a config
// error, 2 on a data error; failures print "ERR:<code>: <message>" to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mlvat
