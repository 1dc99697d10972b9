#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "medgrpo/judge.hpp"

namespace medgrpo::judge {

// In-process chat-completion server speaking the judge wire shape. By
// default it extracts both captions from the incoming prompt and answers
// with mock_judge scores; tests can pin fixed scores or script failures.
class MockJudgeServer {
 public:
  MockJudgeServer();
  ~MockJudgeServer();

  MockJudgeServer(const MockJudgeServer&) = delete;
  MockJudgeServer& operator=(const MockJudgeServer&) = delete;

  // Binds to an ephemeral port on 127.0.0.1 and serves on a background
  // thread. Returns the chat-completion endpoint URL.
  std::string start();
  void stop();

  // Every response uses these scores instead of the token-overlap mock.
  void set_fixed_scores(const JudgeScores& scores);
  // The next n requests fail with HTTP 500 before the server answers again.
  void fail_next(int n);
  // The next n requests return well-formed JSON whose content has no scores.
  void garble_next(int n);
  // Handler hold time, for exercising client-side concurrency limits.
  void set_response_delay_ms(int ms);

  int total_requests() const { return total_requests_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread server_thread_;
  std::atomic<int> total_requests_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<int> fail_remaining_{0};
  std::atomic<int> garble_remaining_{0};
  std::atomic<int> response_delay_ms_{0};
  std::optional<JudgeScores> fixed_scores_;
  int port_ = 0;
};

// Pulls the two captions back out of a judge prompt built by
// build_judge_prompt. Used by the mock server to answer on-topic.
bool extract_captions_from_prompt(const std::string& prompt, std::string* generated,
                                  std::string* reference);

}  // namespace medgrpo::judge
