#include "aplot/cli.hpp"

int main(int argc, char** argv) { return aplot::cli::main(argc, argv); }
