#include <iostream>
#include <string>
#include <vector>

#include "catfill/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return catfill::cli::run(std::move(args), std::cout, std::cerr);
}
