#include <iostream>
#include <string>
#include <vector>

#include "comboplat/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return comboplat::run_cli(args, std::cout, std::cerr);
}
