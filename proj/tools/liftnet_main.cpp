#include <string>
#include <vector>

#include "liftnet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return liftnet::cli::run(args);
}
