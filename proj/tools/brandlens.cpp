#include <csignal>
#include <iostream>

#include "brandlens/cli.hpp"

namespace {

void on_interrupt(int) { brandlens::cli_stop_flag().store(true); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
  return brandlens::run_cli(argc, argv, std::cout, std::cerr);
}
