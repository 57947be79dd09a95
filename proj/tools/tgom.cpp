#include <iostream>
#include <string>
#include <vector>

#include "tgom/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tgom::run_cli(args, std::cout, std::cerr);
}
