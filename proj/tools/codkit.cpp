#include <iostream>

#include "codkit/app.hpp"

int main(int argc, char** argv) { return codkit::run_cli(argc, argv, std::cout, std::cerr); }
