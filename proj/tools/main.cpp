#include <iostream>

#include "cliquesynth/cli.hpp"

int main(int argc, char** argv) {
  return cliquesynth::run_cli(argc, argv, std::cout, std::cerr);
}
