#include <iostream>

#include <sobi/cli.hpp>

int main(int argc, char** argv) { return sobi::cli::run(argc, argv, std::cout, std::cerr); }
