#include <condition_variable>
#include <cstdlib>
#include <iostream>
#include <mutex>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ftg/error.hpp"
#include "ftg/generators.hpp"

namespace ftg {

HttpChatConfig HttpChatConfig::from_env() {
  HttpChatConfig c;
  const char* url = std::getenv("FTG_LLM_URL");
  if (!url || !*url) throw InvalidArgument("FTG_LLM_URL is not set");
  c.url = url;
  if (const char* key = std::getenv("FTG_LLM_KEY")) c.api_key = key;
  return c;
}

struct HttpChatGenerator::State {
  std::string origin;  // scheme://host[:port]
  std::string path;
  std::mutex mu;
  std::condition_variable cv;
  unsigned in_flight = 0;
  unsigned peak = 0;
  std::once_flag graph_vec_warning;
};

HttpChatGenerator::HttpChatGenerator(HttpChatConfig config)
    : config_(std::move(config)), state_(std::make_unique<State>()) {
  if (config_.max_in_flight == 0) throw InvalidArgument("max_in_flight must be at least 1");
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("bad endpoint URL '" + config_.url + "'");
  const auto scheme = config_.url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw InvalidArgument("unsupported URL scheme '" + scheme + "'");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") throw InvalidArgument("this build has no TLS support");
#endif
  const auto path_start = config_.url.find('/', scheme_end + 3);
  state_->origin = config_.url.substr(0, path_start);
  state_->path = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
}

HttpChatGenerator::~HttpChatGenerator() = default;

unsigned HttpChatGenerator::peak_in_flight() const {
  std::lock_guard lock(state_->mu);
  return state_->peak;
}

std::string chat_request_body(const HttpChatConfig& config, const InstructionSample& sample,
                              std::size_t n_return) {
  nlohmann::ordered_json body;
  body["model"] = config.model;
  body["messages"] = nlohmann::ordered_json::array(
      {{{"role", "user"}, {"content", render_prompt(sample, false)}}});
  body["n"] = n_return;
  body["temperature"] = config.temperature;
  return body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::vector<std::string> parse_chat_response(std::string_view body) {
  std::vector<std::string> out;
  try {
    const auto j = nlohmann::json::parse(body);
    for (const auto& choice : j.at("choices")) {
      const auto& content = choice.at("message").at("content");
      if (content.is_string()) out.push_back(content.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed chat response: ") + e.what());
  }
  return out;
}

std::vector<std::string> HttpChatGenerator::generate(const InstructionSample& sample,
                                                     std::size_t n_return) {
  if (n_return == 0) return {};
  if (sample.graph_vec) {
    std::call_once(state_->graph_vec_warning, [] {
      std::cerr << "warning: http generator ignores graph_vec (text-only protocol)\n";
    });
  }
  {
    std::unique_lock lock(state_->mu);
    state_->cv.wait(lock, [&] { return state_->in_flight < config_.max_in_flight; });
    ++state_->in_flight;
    state_->peak = std::max(state_->peak, state_->in_flight);
  }
  struct Release {
    State& s;
    ~Release() {
      {
        std::lock_guard lock(s.mu);
        --s.in_flight;
      }
      s.cv.notify_one();
    }
  } release{*state_};

  httplib::Client client(state_->origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);

  const auto res = client.Post(state_->path, chat_request_body(config_, sample, n_return),
                               "application/json");
  if (!res) throw TransportError("request to " + config_.url + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
  auto out = parse_chat_response(res->body);
  if (out.size() > n_return) out.resize(n_return);
  return out;
}

}  // namespace ftg
