#include <iostream>

#include "coalinla/cli.hpp"

int main(int argc, char** argv) { return coalinla::cli::run(argc, argv, std::cout, std::cerr); }
