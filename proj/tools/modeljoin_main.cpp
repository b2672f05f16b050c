#include <string>
#include <vector>

#include "modeljoin/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return modeljoin::run_cli(args);
}
