#include <string>
#include <vector>

#include "joinsample/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return joinsample::run_cli(args);
}
