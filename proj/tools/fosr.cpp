#include <iostream>

#include "fosr/cli.hpp"

int main(int argc, char** argv) { return fosr::run_cli(argc, argv, std::cerr); }
