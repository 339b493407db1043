#include <iostream>

#include "rag/cli.hpp"

int main(int argc, char** argv) { return rag::run_cli(argc, argv, std::cout, std::cerr, std::cin); }
