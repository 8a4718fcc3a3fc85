#include <iostream>

#include "collapse/cli.hpp"

int main(int argc, char** argv) { return collapse::run_cli(argc, argv, std::cout, std::cerr); }
