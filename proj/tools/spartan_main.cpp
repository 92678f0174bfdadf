#include <iostream>
#include <string>
#include <vector>

#include "spartan/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return spartan::run_cli(args, std::cout, std::cerr);
}
