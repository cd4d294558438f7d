#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "fedwatch/mock_server.hpp"

namespace {
fedwatch::MockServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serves a fixture world of fake instances for crawler runs", "fedwatch-mock"};
  std::string world;
  int port = 8089;
  app.add_option("--world", world, "World JSON")->required()->check(CLI::ExistingFile);
  app.add_option("--port", port, "Loopback port");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    fedwatch::MockServer server(fedwatch::MockWorld::load(world), port);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "serving " << world << " on " << server.base_url() << "\n";
    server.wait();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
