#include "irml/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return irml::cli::run(argc, argv, std::cout, std::cerr); }
