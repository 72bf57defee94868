#include <iostream>

#include "acida/cli.hpp"

int main(int argc, char** argv) { return acida::run_cli(argc, argv, std::cout, std::cerr); }
