#include <iostream>

#include "extrinsiq/cli.hpp"

int main(int argc, char** argv) { return extrinsiq::run_cli(argc, argv, std::cout, std::cerr); }
