#include <iostream>

#include "ftg_cli/cli.hpp"

int main(int argc, char** argv) { return ftg::cli::run(argc, argv, std::cout, std::cerr); }
