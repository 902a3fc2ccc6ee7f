#include "xaiopt/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return xaiopt::run_cli(argc, argv, std::cout, std::cerr); }
