#include <iostream>

#include "dynafed/harness/cli.hpp"

int main(int argc, char** argv) { return dynafed::run_cli(argc, argv, std::cout, std::cerr); }
