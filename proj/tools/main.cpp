#include <iostream>
#include <string>
#include <vector>

#include "subsense/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return subsense::cli::dispatch(args, std::cout, std::cerr);
}
