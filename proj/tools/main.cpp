#include <iostream>

#include "cstc/cli.hpp"

int main(int argc, char** argv) { return cstc::run(argc, argv, std::cout, std::cerr); }
