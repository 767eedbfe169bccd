#include <iostream>

#include "grounding/cli.h"

int main(int argc, char **argv) { return grounding::cli::Run(argc, argv, std::cout, std::cerr); }
