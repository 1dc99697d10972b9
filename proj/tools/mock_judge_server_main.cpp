#include <chrono>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "medgrpo/mock_judge_server.hpp"

// Standalone mock judge for poking the client by hand:
//   medgrpo_mock_judge --delay-ms 100
// prints its endpoint and serves until killed.
int main(int argc, char** argv) {
  CLI::App app{"mock judge endpoint"};
  int delay_ms = 0;
  app.add_option("--delay-ms", delay_ms, "artificial per-request latency");
  CLI11_PARSE(app, argc, argv);

  medgrpo::judge::MockJudgeServer server;
  server.set_response_delay_ms(delay_ms);
  const std::string endpoint = server.start();
  std::cout << "mock judge listening at " << endpoint << std::endl;
  std::cout << "POST chat-completion requests there; ctrl-c to stop" << std::endl;
  while (true) {
    std::this_thread::sleep_for(std::chrono::seconds(1));
  }
}
