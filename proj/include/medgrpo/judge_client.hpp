#pragma once

#include <memory>
#include <string>

#include "medgrpo/judge.hpp"
#include "medgrpo/rewards.hpp"

namespace medgrpo::judge {

struct JudgeConfig {
  std::string endpoint;  // full URL, e.g. http://127.0.0.1:8123/v1/chat/completions
  std::string model = "judge-model";
  std::string api_key;   // usually from MEDGRPO_JUDGE_API_KEY
  double temperature = 0.0;
  double timeout_seconds = 30.0;
  int max_retries = 3;
  int max_concurrent_requests = 4;
  // Exponential backoff between retries: base * 2^attempt. Tests shrink the
  // base; production keeps the default.
  double backoff_base_seconds = 0.5;

  void validate() const;  // throws ConfigError
};

// Chat-completion client for the judge endpoint. Transient failures
// (connect errors, 5xx, 429, unparseable content) retry with exponential
// backoff; auth and bad-request rejections surface immediately as
// ConfigError; exhausted retries raise JudgeUnavailableError. At most
// max_concurrent_requests are in flight across all threads sharing one
// client.
class JudgeClient {
 public:
  explicit JudgeClient(JudgeConfig config);
  ~JudgeClient();

  JudgeClient(const JudgeClient&) = delete;
  JudgeClient& operator=(const JudgeClient&) = delete;

  JudgeScores call(const JudgeRequest& request);

  const JudgeConfig& config() const { return config_; }

 private:
  struct Impl;
  JudgeConfig config_;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrapper.
JudgeScores judge_call(const JudgeConfig& config, const JudgeRequest& request);

// rewards::JudgeProvider backed by a JudgeClient.
class HttpJudgeProvider : public rewards::JudgeProvider {
 public:
  explicit HttpJudgeProvider(JudgeConfig config) : client_(std::move(config)) {}
  JudgeScores score(const JudgeRequest& request) override { return client_.call(request); }

 private:
  JudgeClient client_;
};

}  // namespace medgrpo::judge
