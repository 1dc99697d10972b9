#include "medgrpo/mock_judge_server.hpp"

#include <chrono>

#include <httplib.h>
#include <json.hpp>

namespace medgrpo::judge {

namespace {

std::string section_between(const std::string& text, const std::string& header,
                            const std::string& next_header) {
  std::size_t start = text.find(header);
  if (start == std::string::npos) return {};
  start += header.size();
  std::size_t end = text.find(next_header, start);
  if (end == std::string::npos) return {};
  std::string value = text.substr(start, end - start);
  while (!value.empty() && (value.front() == '\n' || value.front() == '\r')) value.erase(0, 1);
  while (!value.empty() && (value.back() == '\n' || value.back() == '\r')) value.pop_back();
  return value;
}

}  // namespace

bool extract_captions_from_prompt(const std::string& prompt, std::string* generated,
                                  std::string* reference) {
  std::string ref = section_between(prompt, "Reference caption:", "\n\nGenerated caption:");
  std::string gen = section_between(prompt, "Generated caption:", "\n\nScore each dimension");
  if (ref.empty() && gen.empty()) return false;
  *reference = ref;
  *generated = gen;
  return true;
}

struct MockJudgeServer::Impl {
  httplib::Server server;
};

MockJudgeServer::MockJudgeServer() : impl_(std::make_unique<Impl>()) {}

MockJudgeServer::~MockJudgeServer() { stop(); }

std::string MockJudgeServer::start() {
  impl_->server.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
    total_requests_.fetch_add(1);
    int now = in_flight_.fetch_add(1) + 1;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    int delay = response_delay_ms_.load();
    if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));

    struct Leave {
      std::atomic<int>* counter;
      ~Leave() { counter->fetch_sub(1); }
    } leave{&in_flight_};

    if (fail_remaining_.load() > 0) {
      fail_remaining_.fetch_sub(1);
      res.status = 500;
      res.set_content("{\"error\": \"scripted failure\"}", "application/json");
      return;
    }

    std::string content;
    if (garble_remaining_.load() > 0) {
      garble_remaining_.fetch_sub(1);
      content = "I could not decide on any of the requested dimensions.";
    } else if (fixed_scores_.has_value()) {
      content = render_judge_scores(*fixed_scores_);
    } else {
      JudgeScores scores{3, 3, 3, 3, 3};
      try {
        nlohmann::json doc = nlohmann::json::parse(req.body);
        std::string prompt;
        for (const auto& message : doc.at("messages")) {
          if (message.value("role", "") == "user") {
            prompt = message.value("content", "");
          }
        }
        std::string generated;
        std::string reference;
        if (extract_captions_from_prompt(prompt, &generated, &reference)) {
          scores = mock_judge(JudgeRequest{generated, reference, TaskKind::kVS});
        }
      } catch (const nlohmann::json::exception&) {
        res.status = 400;
        res.set_content("{\"error\": \"request body is not valid JSON\"}", "application/json");
        return;
      }
      content = render_judge_scores(scores);
    }

    nlohmann::json reply = {
        {"choices",
         {{{"message", {{"role", "assistant"}, {"content", content}}},
           {"finish_reason", "stop"}}}},
    };
    res.set_content(reply.dump(), "application/json");
  });

  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  server_thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
}

void MockJudgeServer::stop() {
  if (server_thread_.joinable()) {
    impl_->server.stop();
    server_thread_.join();
  }
}

void MockJudgeServer::set_fixed_scores(const JudgeScores& scores) { fixed_scores_ = scores; }
void MockJudgeServer::fail_next(int n) { fail_remaining_.store(n); }
void MockJudgeServer::garble_next(int n) { garble_remaining_.store(n); }
void MockJudgeServer::set_response_delay_ms(int ms) { response_delay_ms_.store(ms); }

}  // namespace medgrpo::judge
