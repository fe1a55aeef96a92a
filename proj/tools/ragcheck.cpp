#include <iostream>

#include "ragcheck/cli.hpp"

int main(int argc, char** argv) { return ragcheck::cli::run(argc, argv, std::cout, std::cerr); }
