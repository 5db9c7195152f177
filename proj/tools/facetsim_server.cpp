// facetsim-server: REST API over a workspace.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <string>

#include "facetsim/server.hpp"

namespace {

facetsim::ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facetsim-server: REST API for the facetsim workbench"};
  std::string bind = "127.0.0.1:8080";
  std::string workspace = ".";
  std::string runs;
  app.add_option("--bind", bind, "host:port to listen on (port 0 picks one)");
  app.add_option("--workspace", workspace, "Workspace root");
  app.add_option("--runs", runs, "Archive directory (default: <workspace>/runs)");
  CLI11_PARSE(app, argc, argv);

  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) {
    std::cerr << "error: --bind expects host:port\n";
    return 1;
  }
  const std::string host = bind.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(bind.substr(colon + 1));
  } catch (const std::exception&) {
    std::cerr << "error: bad port in --bind\n";
    return 1;
  }

  facetsim::ApiServer server(workspace, runs.empty() ? std::nullopt : std::optional<std::filesystem::path>(runs));
  const int bound = server.bind(host, port);
  if (bound < 0) {
    std::cerr << "error: cannot bind " << bind << "\n";
    return 2;
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on " << host << ":" << bound << std::endl;
  server.serve();
  g_server = nullptr;
  return 0;
}
