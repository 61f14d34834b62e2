#include <iostream>

#include "hsel/cli/cli.hpp"

int main(int argc, char** argv) { return hsel::cli::dispatch(argc, argv, std::cout, std::cerr); }
