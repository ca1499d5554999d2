#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>

#include "tracelab/rng.hpp"
#include "tracelab/trace.hpp"

using namespace tracelab;

namespace {

// Independent word-count oracle: stream extraction.
int stream_word_count(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  int count = 0;
  while (in >> word) ++count;
  return count;
}

// Random text over a tag-free alphabet (letters, digits, spaces, a few
// punctuation marks; no '<' or '>').
std::string random_tag_free_text(rng::Stream& stream, std::size_t max_len) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,;:!?-";
  const std::size_t len = stream.uniform_index(max_len + 1);
  std::string out;
  out.reserve(len);
  for (std::size_t i = 0; i < len; ++i)
    out.push_back(alphabet[stream.uniform_index(alphabet.size())]);
  return out;
}

}  // namespace

TEST_CASE("parse_trace handles a well-formed two-segment trace") {
  const ParsedTrace t = parse_trace("<think>abc</think><answer>B</answer>");
  CHECK(t.think == "abc");
  CHECK(t.answer == "B");
  CHECK(t.format_valid);
}

TEST_CASE("parse_trace flags a missing think tag") {
  const ParsedTrace t = parse_trace("<answer>B</answer>");
  CHECK(t.think.empty());
  CHECK(t.answer == "B");
  CHECK_FALSE(t.format_valid);
}

TEST_CASE("parse_trace flags a missing answer tag") {
  const ParsedTrace t = parse_trace("<think>x</think>no tag");
  CHECK(t.think == "x");
  CHECK(t.answer.empty());
  CHECK_FALSE(t.format_valid);
}

TEST_CASE("parse_trace is total on degenerate inputs") {
  for (const char* raw : {"", "   ", "plain text", "<think>", "</answer>",
                          "<think><think>a</think></think><answer>B</answer>"}) {
    const ParsedTrace t = parse_trace(raw);
    CHECK_FALSE(t.format_valid);
    CHECK(t.raw == raw);
  }
}

TEST_CASE("parse_trace rejects content outside the tags") {
  CHECK_FALSE(parse_trace("<think>a</think><answer>B</answer> trailing")
                  .format_valid);
  CHECK_FALSE(parse_trace("prefix <think>a</think><answer>B</answer>")
                  .format_valid);
  CHECK_FALSE(parse_trace("<think>a</think>x<answer>B</answer>").format_valid);
  // Whitespace outside the tags is fine.
  CHECK(parse_trace(" \n<think>a</think>\t <answer>B</answer>\n").format_valid);
}

TEST_CASE("parse_trace rejects extra or reordered tag pairs") {
  const ParsedTrace extra =
      parse_trace("<think>a</think><think>b</think><answer>B</answer>");
  CHECK_FALSE(extra.format_valid);
  CHECK(extra.think == "a");  // first segment wins
  CHECK_FALSE(
      parse_trace("<answer>B</answer><think>a</think>").format_valid);
}

TEST_CASE("render_trace emits the empty-think case") {
  CHECK(render_trace("", "A") == "<think></think><answer>A</answer>");
}

TEST_CASE("render_trace rejects embedded tag delimiters") {
  CHECK_THROWS_AS(render_trace("a</think>b", "A"), std::invalid_argument);
  CHECK_THROWS_AS(render_trace("ok", "<answer>"), std::invalid_argument);
}

TEST_CASE("parse-render round trip is the identity on tag-free fields") {
  rng::Stream stream(20240809);
  for (int i = 0; i < 1000; ++i) {
    const std::string think = random_tag_free_text(stream, 60);
    const std::string answer = random_tag_free_text(stream, 20);
    const ParsedTrace parsed = parse_trace(render_trace(think, answer));
    REQUIRE(parsed.format_valid);
    REQUIRE(parsed.think == think);
    REQUIRE(parsed.answer == answer);
  }
}

TEST_CASE("whitespace padding preserves validity and fields") {
  rng::Stream stream(7);
  const std::string raw = render_trace("some thought", "B");
  const ParsedTrace base = parse_trace(raw);
  REQUIRE(base.format_valid);
  for (const char* pad : {" ", "\n", "\t\t", " \r\n "}) {
    const ParsedTrace padded = parse_trace(pad + raw + pad);
    CHECK(padded.format_valid);
    CHECK(padded.think == base.think);
    CHECK(padded.answer == base.answer);
  }
}

TEST_CASE("think_length counts whitespace-delimited words") {
  ParsedTrace t;
  t.think = "";
  CHECK(think_length(t) == 0);
  t.think = "first the pitch rises";
  CHECK(think_length(t) == 4);
  t.think = "one \t\t two \n   three";
  CHECK(think_length(t) == 3);
}

TEST_CASE("think_length matches a stream-extraction oracle") {
  rng::Stream stream(99);
  for (int i = 0; i < 500; ++i) {
    ParsedTrace t;
    t.think = random_tag_free_text(stream, 80);
    CHECK(think_length(t) == stream_word_count(t.think));
  }
}

TEST_CASE("QAInstance validation enforces shape invariants") {
  QAInstance inst;
  inst.id = "x";
  inst.caption = {"wa"};
  inst.question = "q";
  inst.choices.resize(4);
  for (auto& c : inst.choices) c.concepts = {"wb"};
  inst.gold_index = 0;
  CHECK_NOTHROW(inst.validate());

  QAInstance bad = inst;
  bad.choices.resize(3);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = inst;
  bad.gold_index = 4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = inst;
  bad.caption.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = inst;
  bad.choices[2].concepts.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
