#include <cstdio>

#include "rtdlab/core/build_info.hpp"

int main() {
  std::printf("rtdlab (%s): command-line interface not wired up yet\n", rtdlab::build_id());
  return 2;
}
