#include <iostream>

#include "o2o/cli/cli.hpp"

int main(int argc, char** argv) { return o2o::cli::run(argc, argv, std::cout, std::cerr); }
