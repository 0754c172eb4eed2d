#include <iostream>

#include "wmg/cli.hpp"

int main(int argc, char** argv) { return wmg::run_cli(argc, argv, std::cout, std::cerr); }
