#include "pilesim/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return pilesim::cli::run(argc, argv, std::cout, std::cerr); }
