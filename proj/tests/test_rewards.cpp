#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "reference_scorer.hpp"
#include "tracelab/rewards.hpp"
#include "tracelab/rng.hpp"
#include "tracelab/trace.hpp"

using namespace tracelab;

namespace {

QAInstance man_instance() {
  QAInstance inst;
  inst.id = "man";
  inst.caption = {"footsteps", "voice"};
  inst.question = "Who is speaking in the audio?";
  inst.choices = {Choice{"robot", {"robot"}}, Choice{"man", {"man"}},
                  Choice{"woman", {"woman"}}, Choice{"dog", {"dog"}}};
  inst.gold_index = 1;
  return inst;
}

QAInstance bell_instance() {
  QAInstance inst;
  inst.id = "bell";
  inst.caption = {"pitch", "bell"};
  inst.question = "What do you hear?";
  inst.choices = {Choice{"pitch bell", {"pitch", "bell"}},
                  Choice{"drum kit", {"drum", "kit"}},
                  Choice{"horn blast", {"horn", "blast"}},
                  Choice{"rain storm", {"rain", "storm"}}};
  inst.gold_index = 0;
  return inst;
}

ParsedTrace trace_with(std::string think, std::string answer) {
  return parse_trace(render_trace(think, answer));
}

std::string random_words(rng::Stream& stream, int max_words) {
  static const std::vector<std::string> bank = {
      "pitch",  "bell",   "first",   "sound", "then",  "drum",  "rises",
      "the",    "a",      "of",      "horn",  "rain",  "storm", "kit",
      "so",     "since",  "suggests", "tone", "voice", "nz1",   "wx",
      "melody", "louder", "therefore"};
  const int n = static_cast<int>(stream.uniform_index(max_words + 1));
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i > 0) out.push_back(' ');
    out += bank[stream.uniform_index(bank.size())];
  }
  return out;
}

}  // namespace

// ===========================================================================
// accuracy / format
// ===========================================================================

TEST_CASE("accuracy reward matches gold by text and by letter") {
  const QAInstance inst = man_instance();
  CHECK(accuracy_reward(trace_with("", "man"), inst) == 1);
  CHECK(accuracy_reward(trace_with("", "  MAN "), inst) == 1);
  CHECK(accuracy_reward(trace_with("", "robot"), inst) == 0);
  CHECK(accuracy_reward(trace_with("", "B"), inst) == 1);
  CHECK(accuracy_reward(trace_with("", "b"), inst) == 1);
  CHECK(accuracy_reward(trace_with("", "A"), inst) == 0);
  CHECK(accuracy_reward(trace_with("", "no such choice"), inst) == 0);
  CHECK(accuracy_reward(trace_with("", ""), inst) == 0);
}

TEST_CASE("format reward requires both components in order") {
  CHECK(format_reward(parse_trace("<think>x</think><answer>B</answer>")) == 1);
  CHECK(format_reward(parse_trace("<answer>B</answer>")) == 0);
  const std::string trailing = "<think>x</think><answer>B</answer> and more";
  CHECK(format_reward(parse_trace(trailing)) == 0);
  CHECK(refscore::strict_format(trailing) == false);  // oracle agrees
}

TEST_CASE("format reward agrees with the strict-matcher oracle") {
  rng::Stream stream(31337);
  for (int i = 0; i < 300; ++i) {
    std::string raw;
    switch (stream.uniform_index(5)) {
      case 0: raw = render_trace(random_words(stream, 6), "A"); break;
      case 1: raw = "<answer>A</answer>"; break;
      case 2: raw = " " + render_trace("x", "B") + "  "; break;
      case 3: raw = render_trace("x", "B") + random_words(stream, 2); break;
      default: raw = random_words(stream, 8); break;
    }
    CAPTURE(raw);
    CHECK(format_reward(parse_trace(raw)) ==
          (refscore::strict_format(raw) ? 1 : 0));
  }
}

// ===========================================================================
// concept extraction and similarity
// ===========================================================================

TEST_CASE("concept_set tokenizes, lowercases, and drops stopwords") {
  CHECK(concept_set("The pitch rises") ==
        std::vector<std::string>{"pitch", "rises"});
  CHECK(concept_set("").empty());
  CHECK(concept_set("a the of").empty());
  CHECK(concept_set("Pitch, pitch; PITCH!") ==
        std::vector<std::string>{"pitch"});
}

TEST_CASE("semantic similarity endpoints and worked example") {
  CHECK(semantic_similarity("pitch rises", "pitch rises") == 1.0);
  CHECK(semantic_similarity("pitch bell", "drum kit") == 0.0);
  CHECK(semantic_similarity("", "pitch") == 0.0);
  CHECK(semantic_similarity("", "") == 0.0);
  // {ax,bx,cx} vs {bx,cx,dx,ex} -> 2/4
  CHECK(semantic_similarity("ax bx cx", "bx cx dx ex") ==
        Catch::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("semantic similarity is symmetric and bounded") {
  rng::Stream stream(5150);
  for (int i = 0; i < 500; ++i) {
    const std::string x = random_words(stream, 12);
    const std::string y = random_words(stream, 12);
    const double sxy = semantic_similarity(x, y);
    const double syx = semantic_similarity(y, x);
    REQUIRE(sxy == syx);
    REQUIRE(sxy >= 0.0);
    REQUIRE(sxy <= 1.0);
  }
}

TEST_CASE("consistency reward covers empty and identical cases") {
  const QAInstance inst = [] {
    QAInstance i;
    i.id = "c";
    i.caption = {"pitch"};
    i.question = "pitch rises";
    i.choices = {Choice{"pitch rises", {"pitch", "rises"}},
                 Choice{"pitch rises", {"pitch", "rises"}},
                 Choice{"pitch rises", {"pitch", "rises"}},
                 Choice{"pitch rises", {"pitch", "rises"}}};
    i.gold_index = 0;
    return i;
  }();
  CHECK(consistency_reward(trace_with("", "pitch rises"), inst) == 0.0);
  // think identical to answer and to the whole question context -> 2.0
  CHECK(consistency_reward(trace_with("pitch rises", "pitch rises"), inst) ==
        Catch::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("consistency reward matches hand-built set arithmetic") {
  const QAInstance inst = bell_instance();
  const ParsedTrace t =
      trace_with("The Pitch suggests a BELL tone", "pitch bell");
  // think concepts {pitch, suggests, bell, tone}; answer {pitch, bell};
  // context {hear, pitch, bell, drum, kit, horn, blast, rain, storm}
  const double expected = 2.0 / 4.0 + 2.0 / 9.0;
  CHECK(consistency_reward(t, inst) == Catch::Approx(expected).epsilon(1e-15));
}

// ===========================================================================
// keyword taxonomy
// ===========================================================================

TEST_CASE("keyword reward detects pattern, logic, and domain entries") {
  const KeywordTaxonomy taxonomy = default_taxonomy();
  const KeywordScores s =
      keyword_reward("First, the pitch suggests a bell; therefore...", taxonomy);
  CHECK(s.pattern >= 1.0);  // first
  CHECK(s.logic >= 2.0);    // suggests, therefore
  CHECK(s.domain >= 2.0);   // pitch, bell
  const KeywordScores empty = keyword_reward("", taxonomy);
  CHECK(empty.pattern == 0.0);
  CHECK(empty.logic == 0.0);
  CHECK(empty.domain == 0.0);
}

TEST_CASE("each taxonomy entry fires at most once") {
  const KeywordTaxonomy taxonomy = default_taxonomy();
  CHECK(keyword_reward("first first first", taxonomy).pattern == 1.0);
  CHECK(keyword_reward("bell bell bell bell", taxonomy).domain == 1.0);
}

TEST_CASE("literal matching is whole-phrase and case-insensitive") {
  const KeywordTaxonomy taxonomy = default_taxonomy();
  // "so" must not fire inside "sound"
  const KeywordScores sound_only = keyword_reward("sound check", taxonomy);
  CHECK(sound_only.logic == 0.0);
  CHECK(sound_only.domain == 1.0);
  CHECK(keyword_reward("SO loud", taxonomy).logic == 1.0);
  CHECK(keyword_reward("Considering   The OPTIONS here", taxonomy).pattern ==
        1.0);
  CHECK(keyword_reward("the ringtone", taxonomy).domain == 0.0);
}

TEST_CASE("numbered lists are detected through the regex rules") {
  const KeywordTaxonomy taxonomy = default_taxonomy();
  CHECK(keyword_reward("1. listen 2. decide", taxonomy).pattern == 2.0);
  CHECK(keyword_reward("21. is not a list start", taxonomy).pattern == 0.0);
  CHECK(keyword_reward("see items 1 and 2", taxonomy).pattern == 0.0);
}

TEST_CASE("taxonomy validation enforces unique non-empty ids") {
  KeywordTaxonomy t = default_taxonomy();
  CHECK_NOTHROW(t.validate());
  t.logic_entries.push_back(t.pattern_entries.front());
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = default_taxonomy();
  t.domain_entries.front().weight = -1.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("default taxonomy carries the full published tables") {
  const KeywordTaxonomy t = default_taxonomy();
  CHECK(t.pattern_entries.size() == 18);  // 16 literals + 2 numbered regexes
  CHECK(t.logic_entries.size() == 16);
  CHECK(t.domain_entries.size() == 32);
}

// ===========================================================================
// overthinking penalty
// ===========================================================================

TEST_CASE("overthinking penalty endpoints") {
  CHECK(overthinking_penalty(0, 256) == 1.0);
  CHECK(overthinking_penalty(256, 256) == 0.0);
  CHECK(overthinking_penalty(64, 256) == 0.75);
  CHECK(overthinking_penalty(300, 256) ==
        Catch::Approx(1.0 - 300.0 / 256.0).epsilon(1e-15));
  CHECK_THROWS_AS(overthinking_penalty(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(overthinking_penalty(1, -5), std::invalid_argument);
  CHECK_THROWS_AS(overthinking_penalty(-1, 256), std::invalid_argument);
}

TEST_CASE("overthinking penalty strictly decreases with length") {
  double prev = overthinking_penalty(0, 256);
  for (int len = 1; len <= 256; ++len) {
    const double cur = overthinking_penalty(len, 256);
    REQUIRE(cur < prev);
    prev = cur;
  }
}

// ===========================================================================
// total reward
// ===========================================================================

TEST_CASE("empty raw text scores total 1.0 under default weights") {
  const RewardBreakdown b =
      total_reward("", man_instance(), RewardWeights{}, default_taxonomy());
  CHECK(b.acc == 0.0);
  CHECK(b.format == 0.0);
  CHECK(b.consistency == 0.0);
  CHECK(b.pattern + b.logic + b.domain == 0.0);
  CHECK(b.overthink == 1.0);
  CHECK(b.total == 1.0);
}

TEST_CASE("hand-computed trace matches the weighted sum end to end") {
  const QAInstance inst = bell_instance();
  const std::string raw = render_trace(
      "first the pitch suggests a bell therefore pitch bell", "pitch bell");
  const RewardBreakdown b =
      total_reward(raw, inst, RewardWeights{}, default_taxonomy());
  CHECK(b.acc == 1.0);
  CHECK(b.format == 1.0);
  CHECK(b.consistency == Catch::Approx(2.0 / 5.0 + 2.0 / 9.0).epsilon(1e-15));
  CHECK(b.pattern == 1.0);
  CHECK(b.logic == 2.0);
  CHECK(b.domain == 2.0);
  CHECK(b.overthink == Catch::Approx(1.0 - 9.0 / 256.0).epsilon(1e-15));
  const double expected =
      5.0 * 1.0 + 1.0 + (2.0 / 5.0 + 2.0 / 9.0) + 5.0 + (1.0 - 9.0 / 256.0);
  CHECK(b.total == Catch::Approx(expected).epsilon(1e-14));
}

TEST_CASE("total is linear in each weight") {
  const QAInstance inst = bell_instance();
  const std::string raw = render_trace(
      "first the pitch suggests a bell therefore pitch bell", "pitch bell");
  const KeywordTaxonomy taxonomy = default_taxonomy();
  const RewardBreakdown base = total_reward(raw, inst, RewardWeights{}, taxonomy);

  for (int which = 0; which < 5; ++which) {
    const double c = 3.5;
    RewardWeights w;
    double delta = 0.0;
    switch (which) {
      case 0: w.alpha_acc *= c; delta = (c - 1.0) * w.alpha_acc / c * base.acc; break;
      case 1: w.alpha_format *= c; delta = (c - 1.0) * base.format; break;
      case 2: w.alpha_consistency *= c; delta = (c - 1.0) * base.consistency; break;
      case 3:
        w.alpha_keywords *= c;
        delta = (c - 1.0) * (base.pattern + base.logic + base.domain);
        break;
      case 4: w.alpha_overthink *= c; delta = (c - 1.0) * base.overthink; break;
    }
    const RewardBreakdown scaled = total_reward(raw, inst, w, taxonomy);
    REQUIRE(std::fabs(scaled.total - (base.total + delta)) < 1e-12);
  }
}

TEST_CASE("weights validation rejects negative and non-finite values") {
  RewardWeights w;
  CHECK_NOTHROW(w.validate());
  w.alpha_keywords = -0.5;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
  w = RewardWeights{};
  w.l_max_output = 0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}

// ===========================================================================
// reference scorer cross-check (golden suite)
// ===========================================================================

TEST_CASE("golden suite of hand-labeled traces matches the reference scorer") {
  const QAInstance bell = bell_instance();
  const QAInstance man = man_instance();

  struct Labeled {
    const QAInstance* instance;
    std::string raw;
  };
  const std::vector<Labeled> golden = {
      {&bell, "<think></think><answer>pitch bell</answer>"},
      {&bell, "<think>first the pitch suggests a bell therefore pitch "
              "bell</think><answer>pitch bell</answer>"},
      {&bell, "<think>considering the options, the best fit is A rather than "
              "B</think><answer>A</answer>"},
      {&bell, "<think>1. listen 2. decide</think><answer>B</answer>"},
      {&bell, "<think>It is likely that the drum kit rings</think>"
              "<answer>drum kit</answer>"},
      {&bell, "<answer>pitch bell</answer>"},
      {&bell, "<think>no closing answer tag<answer>A"},
      {&bell, ""},
      {&bell, "<think>sound SOUND so Sound</think><answer>C</answer>"},
      {&bell, "<think>pitch pitch pitch bell bell bell</think>"
              "<answer>pitch bell</answer>"},
      {&bell, "  <think>on the other hand, compared to a horn, a bell has a "
              "higher pitch</think>\n<answer>pitch bell</answer>  "},
      {&bell, "<think>x</think><answer>A</answer> trailing prose"},
      {&man, "<think>the voice is male, so the speaker is a man</think>"
             "<answer>man</answer>"},
      {&man, "<think>step 1 check intonation step 2 conclude</think>"
             "<answer>  MAN </answer>"},
      {&man, "<think>As evidenced by the rhythm, a robot speaks "
             "generally</think><answer>robot</answer>"},
      {&man, "<think>a the of</think><answer>D</answer>"},
      {&man, "<think>the hooves moo in a clip-clop rhythm since "
             "dawn</think><answer>dog</answer>"},
      {&man, std::string(300, 'x') + "<think>overflow</think>"
             "<answer>man</answer>"},
      {&man, "<think>" + [] {
         std::string s = "word";
         for (int i = 0; i < 299; ++i) s += " word";
         return s;
       }() + "</think><answer>man</answer>"},
      {&man, "<think>Suppose the tone indicates a female whisper; thus "
             "woman</think><answer>woman</answer>"},
  };
  REQUIRE(golden.size() == 20);

  const RewardScorer scorer(RewardWeights{}, default_taxonomy());
  for (const Labeled& g : golden) {
    CAPTURE(g.raw);
    const RewardBreakdown got = scorer.score(g.raw, *g.instance);
    const refscore::Breakdown want = refscore::score(g.raw, *g.instance);
    CHECK(got.acc == want.acc);
    CHECK(got.format == want.format);
    CHECK(got.consistency == Catch::Approx(want.consistency).margin(1e-12));
    CHECK(got.pattern == want.pattern);
    CHECK(got.logic == want.logic);
    CHECK(got.domain == want.domain);
    CHECK(got.overthink == Catch::Approx(want.overthink).margin(1e-12));
    CHECK(got.total == Catch::Approx(want.total).margin(1e-12));
  }
}

TEST_CASE("random traces agree with the reference scorer") {
  rng::Stream stream(8675309);
  const QAInstance inst = bell_instance();
  const RewardScorer scorer(RewardWeights{}, default_taxonomy());
  for (int i = 0; i < 400; ++i) {
    std::string raw;
    if (stream.uniform_index(4) == 0) {
      raw = random_words(stream, 20);  // formatless garbage
    } else {
      raw = render_trace(random_words(stream, 30), random_words(stream, 4));
    }
    CAPTURE(raw);
    const RewardBreakdown got = scorer.score(raw, inst);
    const refscore::Breakdown want = refscore::score(raw, inst);
    REQUIRE(got.acc == want.acc);
    REQUIRE(got.format == want.format);
    REQUIRE(got.consistency == Catch::Approx(want.consistency).margin(1e-12));
    REQUIRE(got.pattern == want.pattern);
    REQUIRE(got.logic == want.logic);
    REQUIRE(got.domain == want.domain);
    REQUIRE(got.overthink == Catch::Approx(want.overthink).margin(1e-12));
    REQUIRE(got.total == Catch::Approx(want.total).margin(1e-12));
  }
}

TEST_CASE("duplicating present keywords never increases the keyword score") {
  rng::Stream stream(4242);
  const KeywordTaxonomy taxonomy = default_taxonomy();
  const KeywordMatcher matcher(taxonomy);
  for (int i = 0; i < 200; ++i) {
    const std::string think = random_words(stream, 15);
    const KeywordScores base = matcher.score(think);
    const KeywordScores doubled = matcher.score(think + " " + think);
    REQUIRE(doubled.pattern == base.pattern);
    REQUIRE(doubled.logic == base.logic);
    REQUIRE(doubled.domain == base.domain);
  }
}

TEST_CASE("scoring is deterministic") {
  const QAInstance inst = bell_instance();
  const RewardScorer scorer(RewardWeights{}, default_taxonomy());
  const std::string raw =
      render_trace("first the pitch suggests a bell", "pitch bell");
  const RewardBreakdown a = scorer.score(raw, inst);
  const RewardBreakdown b = scorer.score(raw, inst);
  CHECK(a.total == b.total);
  CHECK(a.consistency == b.consistency);
}
