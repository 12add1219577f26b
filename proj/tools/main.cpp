#include <string>
#include <vector>

#include "beliefdyn/cli.hpp"

int main(int argc, char** argv) {
  return beliefdyn::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
