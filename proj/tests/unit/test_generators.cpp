#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "ftg/error.hpp"
#include "ftg/generators.hpp"
#include "ftg/pipeline.hpp"

using namespace ftg;

namespace {

InstructionSample sample(std::string id, std::vector<std::string> candidates, std::string answer) {
  InstructionSample s;
  s.id = std::move(id);
  s.candidates = std::move(candidates);
  for (std::size_t i = 0; i < s.candidates.size(); ++i) s.candidate_ids.push_back(static_cast<EntityId>(i));
  s.answer = std::move(answer);
  return s;
}

// Local chat-completions endpoint; the handler decides each reply.
class ChatServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit ChatServer(Handler h) {
    server_.Post("/v1/chat/completions", std::move(h));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ChatServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string reply(const std::vector<std::string>& contents) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array();
  for (const auto& c : contents) j["choices"].push_back({{"message", {{"role", "assistant"}, {"content", c}}}});
  return j.dump();
}

}  // namespace

TEST_CASE("oracle generator") {
  const auto s = sample("q1", {"a", "b", "c"}, "b");
  OracleGenerator perfect(1.0, 3);
  CHECK(perfect.generate(s, 10) == std::vector<std::string>{"b"});
  CHECK(perfect.generate(s, 0).empty());

  OracleGenerator never(0.0, 3);
  for (int i = 0; i < 20; ++i) {
    const auto out = never.generate(sample("q" + std::to_string(i), {"a", "b", "c"}, "b"), 10);
    REQUIRE(out.size() == 1);
    CHECK(out[0] != "b");
  }
  CHECK(never.generate(sample("solo", {"b"}, "b"), 10).empty());

  // Target absent from the candidates: some other candidate comes out.
  const auto missing = perfect.generate(sample("q2", {"a", "c"}, "b"), 10);
  REQUIRE(missing.size() == 1);
  CHECK(missing[0] != "b");

  OracleGenerator half(0.5, 9);
  int hits = 0;
  for (int i = 0; i < 400; ++i) {
    const auto s2 = sample("h" + std::to_string(i), {"a", "b", "c"}, "a");
    const auto out = half.generate(s2, 10);
    CHECK(out == half.generate(s2, 10));
    hits += out[0] == "a";
  }
  CHECK(hits > 150);
  CHECK(hits < 250);
  CHECK_THROWS_AS(OracleGenerator(1.5), InvalidArgument);
}

TEST_CASE("echo generator") {
  EchoTop1Generator echo;
  CHECK(echo.generate(sample("q", {"x", "y"}, "y"), 10) == std::vector<std::string>{"x"});
  CHECK(echo.generate(sample("q", {}, "y"), 10).empty());
}

TEST_CASE("replay generator") {
  const auto path = std::filesystem::temp_directory_path() / "ftg_test_replay.jsonl";
  std::ofstream(path) << R"({"id": "q1", "outputs": ["b", "a", "c"]})" << "\n\n"
                      << R"({"id": "q2", "outputs": []})" << "\n";
  ReplayGenerator replay(path);
  CHECK(replay.generate(sample("q1", {"a", "b"}, ""), 2) == std::vector<std::string>{"b", "a"});
  CHECK(replay.generate(sample("q2", {"a"}, ""), 2).empty());
  CHECK(replay.generate(sample("zz", {"a"}, ""), 2).empty());

  std::ofstream(path) << "{\"id\": \"q1\"}\n";
  CHECK_THROWS_AS(ReplayGenerator{path}, ParseError);
  CHECK_THROWS_AS(ReplayGenerator{std::filesystem::path("/nonexistent/replay.jsonl")}, IoError);
}

TEST_CASE("surrogate generator orders candidates by logit") {
  const auto kg = fixture::case_study_kg();
  const auto model = init_model(ModelKind::RotatE, 6, 3, 4, 6.0f, 1);
  const auto reranker = init_reranker(4, 8, 2);
  SurrogateGenerator gen(kg, model, reranker);
  auto s = fixture::case_samples(kg, SampleKind::Eval).tail;
  CHECK_THROWS_AS(gen.generate(s, 3), InvalidArgument);  // graph_vec has the wrong width
  s.graph_vec = std::vector<float>{0.1f, 0.2f, -0.3f, 0.4f};
  const auto out = gen.generate(s, 2);
  REQUIRE(out.size() == 2);

  Query q;
  q.anchor = 0;
  q.rel = 0;
  const std::vector<double> pooled{0.1f, 0.2f, -0.3f, 0.4f};
  const auto logits = surrogate_logits(reranker, model, query_features(model, q, pooled), s.candidate_ids);
  const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
  CHECK(out[0] == s.candidates[static_cast<std::size_t>(best)]);

  s.graph_vec.reset();
  CHECK_THROWS_AS(gen.generate(s, 2), InvalidArgument);
  CHECK_THROWS_AS(SurrogateGenerator(kg, model, init_reranker(6, 8, 2)), InvalidArgument);
}

TEST_CASE("chat request and response bodies") {
  const auto kg = fixture::case_study_kg();
  const auto s = fixture::case_samples(kg, SampleKind::Eval).tail;
  HttpChatConfig cfg;
  cfg.model = "m1";
  const auto body = nlohmann::json::parse(chat_request_body(cfg, s, 4));
  CHECK(body["model"] == "m1");
  CHECK(body["n"] == 4);
  CHECK(body["temperature"] == 0.0);
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == render_prompt(s, false));

  CHECK(parse_chat_response(reply({"x", "y"})) == std::vector<std::string>{"x", "y"});
  CHECK_THROWS_AS(parse_chat_response("not json"), TransportError);
  CHECK_THROWS_AS(parse_chat_response(R"({"error": "busy"})"), TransportError);
}

TEST_CASE("endpoint from the environment") {
  ::unsetenv("FTG_LLM_URL");
  CHECK_THROWS_AS(HttpChatConfig::from_env(), InvalidArgument);
  ::setenv("FTG_LLM_URL", "http://localhost:1/v1/chat/completions", 1);
  ::setenv("FTG_LLM_KEY", "sekret", 1);
  const auto c = HttpChatConfig::from_env();
  CHECK(c.url == "http://localhost:1/v1/chat/completions");
  CHECK(c.api_key == "sekret");
  ::unsetenv("FTG_LLM_URL");
  ::unsetenv("FTG_LLM_KEY");
  CHECK_THROWS_AS(HttpChatGenerator(HttpChatConfig{"ftp://x", "", "m", 0.0, 1, {}}), InvalidArgument);
}

TEST_CASE("http generator round trip") {
  std::string seen_auth, seen_prompt;
  ChatServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    const auto body = nlohmann::json::parse(req.body);
    seen_prompt = body["messages"][0]["content"];
    res.set_content(reply({"Heidelberg University", "University of Cincinnati", "extra"}), "application/json");
  });
  HttpChatConfig cfg;
  cfg.url = server.url();
  cfg.api_key = "k123";
  HttpChatGenerator gen(cfg);
  const auto kg = fixture::case_study_kg();
  const auto s = fixture::case_samples(kg, SampleKind::Eval).tail;
  CHECK(gen.generate(s, 2) == std::vector<std::string>{"Heidelberg University", "University of Cincinnati"});
  CHECK(seen_auth == "Bearer k123");
  CHECK(seen_prompt == render_prompt(s, false));
  CHECK(gen.concurrency() == 4);
}

TEST_CASE("http failures surface as transport errors") {
  ChatServer server([](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content("busy", "text/plain");
  });
  HttpChatConfig cfg;
  cfg.url = server.url();
  HttpChatGenerator gen(cfg);
  const auto s = sample("q", {"a"}, "a");
  CHECK_THROWS_AS(gen.generate(s, 1), TransportError);

  cfg.url = "http://127.0.0.1:1/v1/chat/completions";
  cfg.timeout = std::chrono::milliseconds(500);
  HttpChatGenerator refused(cfg);
  CHECK_THROWS_AS(refused.generate(s, 1), TransportError);
}

TEST_CASE("concurrent requests stay within max_in_flight") {
  std::atomic<int> active{0}, peak{0};
  ChatServer server([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --active;
    res.set_content(reply({"a"}), "application/json");
  });
  HttpChatConfig cfg;
  cfg.url = server.url();
  cfg.max_in_flight = 2;
  HttpChatGenerator gen(cfg);
  std::vector<std::thread> callers;
  std::atomic<int> ok{0};
  for (int i = 0; i < 6; ++i)
    callers.emplace_back([&, i] {
      if (gen.generate(sample("q" + std::to_string(i), {"a"}, "a"), 1).size() == 1) ++ok;
    });
  for (auto& t : callers) t.join();
  CHECK(ok == 6);
  CHECK(gen.peak_in_flight() <= 2);
  CHECK(gen.peak_in_flight() >= 1);
  CHECK(peak.load() <= 2);
}

TEST_CASE("pipeline retries and then falls back to the filter ranking") {
  const auto kg = synthetic_kg({7, 20, 2, 40});
  const auto model = init_model(ModelKind::RotatE, 20, 2, 8, 6.0f, 3);
  PipelineConfig pc;
  pc.k = 5;
  pc.backoff = std::chrono::milliseconds(1);
  const std::size_t queries = 2 * kg.split(Split::Test).size();

  SUBCASE("permanent failure") {
    std::atomic<int> calls{0};
    ChatServer server([&](const httplib::Request&, httplib::Response& res) {
      ++calls;
      res.status = 500;
    });
    HttpChatConfig cfg;
    cfg.url = server.url();
    cfg.max_in_flight = 2;
    HttpChatGenerator gen(cfg);
    const auto report = run_pipeline(kg, model, gen, pc);
    CHECK(report.fallbacks == queries);
    CHECK(calls.load() == static_cast<int>(3 * queries));
    CHECK(report.metrics.combined.mrr == report.filter_metrics.combined.mrr);
    CHECK_FALSE(report.warnings.empty());
  }
  SUBCASE("transient failure recovers") {
    std::mutex mu;
    std::map<std::string, int> attempts;
    ChatServer server([&](const httplib::Request& req, httplib::Response& res) {
      const std::string prompt = nlohmann::json::parse(req.body)["messages"][0]["content"];
      std::lock_guard lock(mu);
      if (++attempts[prompt] < 3) {
        res.status = 502;
        return;
      }
      res.set_content(reply({"nothing useful"}), "application/json");
    });
    HttpChatConfig cfg;
    cfg.url = server.url();
    HttpChatGenerator gen(cfg);
    const auto report = run_pipeline(kg, model, gen, pc);
    CHECK(report.fallbacks == 0);
    CHECK(report.unparsed == queries);
  }
}
