#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "ftg/error.hpp"
#include "ftg/instruct.hpp"

using namespace ftg;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "ftg_test_instruct";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("verbalization templates") {
  const std::string rel =
      "military/military conflict/combatants./military/military combatant group/combatants";
  const KnowledgeGraph kg({"War on Terrorism", "Canada", "a"}, {rel, "r"},
                          {{{{0, 0, 1}, {2, 1, 1}}, {}, {}}});
  const auto tail = make_query({0, 0, 1}, Direction::Tail, Split::Train, 0);
  const auto head = make_query({0, 0, 1}, Direction::Head, Split::Train, 0);
  const auto minimal = make_query({2, 1, 1}, Direction::Tail, Split::Train, 1);
  const std::string got = verbalize(kg, tail) + "\n" + verbalize(kg, head) + "\n" + verbalize(kg, minimal) + "\n";
  CHECK(got == fixture::read_golden("verbalize.txt"));
  CHECK(verbalize(kg, tail) ==
        "War on Terrorism, military/military conflict/combatants./military/military combatant "
        "group/combatants?");
  CHECK(verbalize(kg, head) ==
        "What/Who/When/Where/Why military/military conflict/combatants./military/military "
        "combatant group/combatants Canada?");
  CHECK(verbalize(kg, minimal) == "a, r?");
}

TEST_CASE("k=3 prompts match the golden files") {
  const auto kg = fixture::case_study_kg();
  const auto s = fixture::case_samples(kg, SampleKind::Train);
  CHECK(render_prompt(s.tail, true) == fixture::read_golden("prompt_tail_k3.txt"));
  CHECK(render_prompt(s.head, false) == fixture::read_golden("prompt_head_k3.txt"));
  CHECK(s.tail.instruction == kInstruction);
  CHECK(s.tail.answer == "Heidelberg University");
}

TEST_CASE("prompt without context omits the Context line") {
  const auto kg = fixture::case_study_kg();
  const auto s = fixture::case_samples(kg, SampleKind::Eval);
  const auto p = render_prompt(s.head, true);
  CHECK(p.find("Context") == std::string::npos);
  CHECK(p.substr(p.rfind('\n') + 1) == "Answer: Friedrich Gundolf");
  CHECK_FALSE(s.head.context.has_value());

  // An empty serialized context counts as no context.
  const auto q = make_query({0, 0, 1}, Direction::Tail, Split::Test, 0);
  const auto empty = serialize_steps(kg, 0, {}, 3500);
  const auto e = build_sample(kg, q, fixture::candidates(q, {1, 2}), &empty, {}, SampleKind::Eval);
  CHECK_FALSE(e.context.has_value());
}

TEST_CASE("train sample without its target is rejected") {
  const auto kg = fixture::case_study_kg();
  const auto q = make_query({0, 0, 1}, Direction::Tail, Split::Test, 0);
  const auto c = fixture::candidates(q, {2, 3});
  CHECK_THROWS_AS(build_sample(kg, q, c, nullptr, {}, SampleKind::Train), InvalidArgument);
  CHECK_NOTHROW(build_sample(kg, q, c, nullptr, {}, SampleKind::Eval));
}

TEST_CASE("duplicate display names are suffixed") {
  const std::vector<std::string> names{"Paris", "London", "paris.", "Paris"};
  CHECK(display_names(names) == std::vector<std::string>{"Paris", "London", "paris. (2)", "Paris (3)"});
}

TEST_CASE("JSONL emission") {
  const auto kg = fixture::case_study_kg();
  const auto s = fixture::case_samples(kg, SampleKind::Train);
  const std::vector<InstructionSample> both{s.tail, s.head};

  SUBCASE("two samples match the golden file") {
    const auto path = scratch("two.jsonl");
    emit_jsonl(both, path, true);
    CHECK(slurp(path) == fixture::read_golden("samples_2.jsonl"));
  }
  SUBCASE("empty list gives an empty file") {
    const auto path = scratch("empty.jsonl");
    emit_jsonl({}, path, true);
    CHECK(std::filesystem::exists(path));
    CHECK(std::filesystem::file_size(path) == 0);
    CHECK(read_jsonl(path).empty());
  }
  SUBCASE("round trip") {
    const auto path = scratch("round.jsonl");
    emit_jsonl(both, path, true);
    CHECK(read_jsonl(path) == both);
    emit_jsonl(both, path, false);
    const auto stripped = read_jsonl(path);
    CHECK_FALSE(stripped[0].graph_vec.has_value());
    CHECK(stripped[0].context == s.tail.context);
  }
  SUBCASE("bad line names its number") {
    const auto path = scratch("bad.jsonl");
    std::ofstream(path) << to_jsonl_line(s.tail, false) << "\n{\"id\": 3}\n";
    try {
      read_jsonl(path);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  CHECK_THROWS_AS(emit_jsonl(both, "/proc/nope/x.jsonl", false), IoError);
}
