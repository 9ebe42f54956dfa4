#include <iostream>

#include "phpq_cli/commands.hpp"

int main(int argc, char** argv) { return phpq::cli::run_cli(argc, argv, std::cout, std::cerr); }
