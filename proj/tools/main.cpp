#include <iostream>

#include "slsada/cli.hpp"

int main(int argc, char** argv) {
  return slsada::parse_and_dispatch(argc, argv, std::cout, std::cerr);
}
