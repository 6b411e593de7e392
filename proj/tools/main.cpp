#include <iostream>
#include <string>
#include <vector>

#include "distreg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return distreg::run_cli(args, std::cout, std::cerr);
}
