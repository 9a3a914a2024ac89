#ifndef APLOT_CLI_HPP_
#define APLOT_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace aplot::cli {

inline constexpr const char* kVersion = "aplot 1.0.0";

/// Runs one command. `args` excludes the program name. Returns the process
/// exit status: 0 on success, 1 on a runtime error, 2 on a usage error.
///
/// Commands: gen, train, eval, bon, sweep-gamma, rerun.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace aplot::cli

#endif  // APLOT_CLI_HPP_
