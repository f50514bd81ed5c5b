#include "hwloc/cli.hpp"

int main(int argc, char** argv) {
  hwloc::init_logging();
  return hwloc::run_cli(argc, argv);
}
