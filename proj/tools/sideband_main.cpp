#include <iostream>

#include "sideband/commands.hpp"

int main(int argc, char** argv) { return sideband::cli::run(argc, argv, std::cout, std::cerr); }
