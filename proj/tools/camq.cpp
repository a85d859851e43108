#include <iostream>

#include "camq/cli/commands.hpp"

int main(int argc, char** argv) { return camq::cli::run_cli(argc, argv, std::cout, std::cerr); }
