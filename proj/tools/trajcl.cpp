#include <iostream>
#include <string>
#include <vector>

#include "trajcl/cli.hpp"

int main(int argc, char** argv) {
  return trajcl::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
