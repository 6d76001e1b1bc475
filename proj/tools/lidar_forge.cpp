#include <iostream>

#include "lidar_forge/cli.hpp"

int main(int argc, char** argv) {
  return lidar_forge::cli::run(argc, argv, std::cout, std::cerr);
}
