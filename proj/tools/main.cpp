#include <iostream>
#include <string>
#include <vector>

#include "gcnseg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return gcnseg::run_cli(args, std::cout, std::cerr);
}
