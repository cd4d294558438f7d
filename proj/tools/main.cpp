#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli.hpp"

int main(int argc, char** argv) {
  // stdout stays free for help text; progress goes to stderr.
  spdlog::set_default_logger(spdlog::stderr_color_mt("fedwatch"));
  std::vector<std::string> args(argv, argv + argc);
  return fedwatch::cli::run(args, std::cout, std::cerr);
}
