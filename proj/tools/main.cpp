#include <iostream>

#include "cli/commands.hpp"

int main(int argc, char** argv) { return tsmfg::cli::run(argc, argv, std::cerr); }
