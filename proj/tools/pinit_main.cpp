#include <string>
#include <vector>

#include "pinit/cli.hpp"

int main(int argc, char** argv) {
  return pinit::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
