#include <iostream>

#include "mtbr/cli.hpp"

int main(int argc, char** argv) { return mtbr::run_cli(argc, argv, std::cout, std::cerr); }
