#include "qsr/cli.hpp"

#include <iostream>

int
main(int argc, char** argv)
{
  return qsr::run_cli(argc, argv, std::cout, std::cerr);
}
