#include <iostream>

#include "dagmath/cli.hpp"

int main(int argc, char** argv) { return dagmath::run_cli(argc, argv, std::cout, std::cerr); }
