#include <iostream>

#include "explang/cli.hpp"

int main(int argc, char** argv) { return explang::run_cli(argc, argv, std::cout, std::cerr); }
