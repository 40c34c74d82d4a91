#include <iostream>

#include "autorad/app.hpp"

int main(int argc, char** argv) { return autorad::run_cli(argc, argv, std::cout, std::cerr); }
