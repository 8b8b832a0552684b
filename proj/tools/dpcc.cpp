#include <iostream>
#include <string>
#include <vector>

#include "dpcc/cli/app.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return dpcc::run_cli(args, std::cout, std::cerr);
}
