#include <iostream>
#include <string>
#include <vector>

#include "hvs5m/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hvs::cli::run(args, std::cout, std::cerr);
}
