#include <iostream>

#include "crowd/cli.hpp"

int main(int argc, char** argv) { return crowd::cli_main(argc, argv, std::cout, std::cerr); }
