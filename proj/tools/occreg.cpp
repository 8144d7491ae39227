#include <iostream>

#include "occreg/cli.hpp"

int main(int argc, char** argv) { return occreg::run_cli(argc, argv, std::cout, std::cerr); }
