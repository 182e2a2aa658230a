#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return i2drnn::run_cli(argc, argv, std::cout, std::cerr); }
