#include <iostream>

#include "metasim/cli/cli.hpp"

int main(int argc, char** argv) {
  return metasim::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
