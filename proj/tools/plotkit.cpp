#include <iostream>

#include "plotkit/cli.hpp"

int main(int argc, char** argv) { return plotkit::cli::run(argc, argv, std::cin, std::cout, std::cerr); }
