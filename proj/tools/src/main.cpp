#include <iostream>
#include <string>
#include <vector>

#include "fdnet/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fdnet::cli::run(args, std::cout, std::cerr);
}
