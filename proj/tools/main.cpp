#include <iostream>

#include "matchbound_cli/cli.hpp"

int main(int argc, char** argv) { return matchbound::cli::run(argc, argv, std::cout, std::cerr); }
