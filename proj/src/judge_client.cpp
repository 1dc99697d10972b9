#include "medgrpo/judge_client.hpp"

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "medgrpo/errors.hpp"

namespace medgrpo::judge {

void JudgeConfig::validate() const {
  if (endpoint.empty()) throw ConfigError("JudgeConfig: endpoint must be set");
  if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
    throw ConfigError("JudgeConfig: endpoint must start with http:// or https://");
  }
  if (model.empty()) throw ConfigError("JudgeConfig: model must be set");
  if (!(timeout_seconds > 0.0)) throw ConfigError("JudgeConfig: timeout_seconds must be positive");
  if (max_retries < 0) throw ConfigError("JudgeConfig: max_retries must be non-negative");
  if (max_concurrent_requests < 1) {
    throw ConfigError("JudgeConfig: max_concurrent_requests must be at least 1");
  }
  if (!(backoff_base_seconds >= 0.0)) {
    throw ConfigError("JudgeConfig: backoff_base_seconds must be non-negative");
  }
}

namespace {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_endpoint(const std::string& endpoint) {
  std::size_t scheme_end = endpoint.find("://");
  std::size_t path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

// Counting gate rather than std::counting_semaphore: the ceiling comes from
// config at run time.
struct JudgeClient::Impl {
  std::mutex mutex;
  std::condition_variable cv;
  int in_flight = 0;

  void acquire(int limit) {
    std::unique_lock lock(mutex);
    cv.wait(lock, [&] { return in_flight < limit; });
    ++in_flight;
  }

  void release() {
    {
      std::lock_guard lock(mutex);
      --in_flight;
    }
    cv.notify_one();
  }
};

JudgeClient::JudgeClient(JudgeConfig config) : config_(std::move(config)) {
  config_.validate();
  impl_ = std::make_unique<Impl>();
}

JudgeClient::~JudgeClient() = default;

JudgeScores JudgeClient::call(const JudgeRequest& request) {
  impl_->acquire(config_.max_concurrent_requests);
  struct Release {
    Impl* impl;
    ~Release() { impl->release(); }
  } release{impl_.get()};

  SplitUrl url = split_endpoint(config_.endpoint);
  nlohmann::json body = {
      {"model", config_.model},
      {"messages",
       {{{"role", "system"}, {"content", judge_system_prompt()}},
        {{"role", "user"}, {"content", build_judge_prompt(request)}}}},
      {"temperature", config_.temperature},
  };
  const std::string payload = body.dump();

  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      double delay = config_.backoff_base_seconds * static_cast<double>(1 << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }

    httplib::Client client(url.base);
    client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
    if (!config_.api_key.empty()) {
      client.set_default_headers({{"Authorization", "Bearer " + config_.api_key}});
    }

    httplib::Result result = client.Post(url.path, payload, "application/json");
    if (!result) {
      last_error = "connection failed: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status == 400 || result->status == 401 || result->status == 403 ||
        result->status == 404) {
      throw ConfigError("judge endpoint rejected the request with HTTP " +
                        std::to_string(result->status) + ": " + result->body);
    }
    if (result->status != 200) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    try {
      nlohmann::json doc = nlohmann::json::parse(result->body);
      std::string content =
          doc.at("choices").at(0).at("message").at("content").get<std::string>();
      return parse_judge_response(content);
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("malformed response body: ") + e.what();
    } catch (const ScoreParseError& e) {
      last_error = e.what();
    }
  }
  throw JudgeUnavailableError("judge call failed after " +
                              std::to_string(config_.max_retries + 1) +
                              " attempts; last error: " + last_error);
}

JudgeScores judge_call(const JudgeConfig& config, const JudgeRequest& request) {
  JudgeClient client(config);
  return client.call(request);
}

}  // namespace medgrpo::judge
