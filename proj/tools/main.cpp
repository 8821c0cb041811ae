#include <string>
#include <vector>

#include "spikeslab/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return spikeslab::cli::run(args);
}
