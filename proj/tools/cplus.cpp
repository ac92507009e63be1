#include <iostream>

#include "cplus/cli.hpp"

int main(int argc, char** argv) { return cplus::cli_main(argc, argv, std::cout, std::cerr); }
