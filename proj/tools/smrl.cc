#include <string>
#include <vector>

#include "smrl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return smrl::run_cli(args);
}
