#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tracelab/rewards.hpp"
#include "tracelab/trace.hpp"

namespace tracelab {

// ============================================================================
// Pairwise reasoning-quality judging
// ============================================================================

enum class Verdict { A, B, Tie };

inline std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::A: return "A";
    case Verdict::B: return "B";
    case Verdict::Tie: return "Tie";
  }
  return "Tie";
}

struct ComparisonRecord {
  std::string instance_id;
  std::string trace_a;
  std::string trace_b;
  Verdict verdict = Verdict::Tie;
  std::string judge_id;
};

/**
 * Win-rate report with ties split equally. Rates are exact rationals
 * (a_num/den and b_num/den with den = 2 * total), rendered as doubles
 * for display; a_num + b_num == den always.
 */
struct WinRateReport {
  long long a_wins = 0;
  long long b_wins = 0;
  long long ties = 0;
  long long total = 0;
  long long a_num = 0;  // 2*a_wins + ties
  long long b_num = 0;  // 2*b_wins + ties
  long long den = 0;    // 2*total
  double a_rate = 0.0;
  double b_rate = 0.0;
};

/// Abstract judge boundary: prompt text in, reply text out. Only the
/// deterministic mock ships; a live multimodal judge plugs in here.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

/**
 * Builds the head-to-head judging prompt: the textual context block
 * (audio proxy, question, choices, gold answer), both reasoning
 * processes, then the instruction sentence with the three allowed
 * conclusions.
 */
inline std::string build_judge_prompt(const QAInstance& instance,
                                      std::string_view gold_answer_text,
                                      std::string_view trace_a,
                                      std::string_view trace_b) {
  if (trace_a.empty() || trace_b.empty())
    throw std::invalid_argument("build_judge_prompt: traces must be non-empty");
  std::string prompt;
  prompt += "Audio context (caption concepts):";
  for (const std::string& token : instance.caption) {
    prompt += ' ';
    prompt += token;
  }
  prompt += "\nQuestion: " + instance.question + "\n";
  for (int c = 0; c < 4; ++c) {
    prompt += static_cast<char>('A' + c);
    prompt += ". " + instance.choices[c].text + "\n";
  }
  prompt += "Correct answer: ";
  prompt += gold_answer_text;
  prompt += "\n\nModel A reasoning process:\n";
  prompt += trace_a;
  prompt += "\n\nModel B reasoning process:\n";
  prompt += trace_b;
  prompt +=
      "\n\nGiven the audio context and two reasoning processes from Model A "
      "and Model B, try to determine which process is superior. A superior "
      "process is more logical, faithful to the audio, and follows a clearer "
      "analytical path. Focus on the quality of the reasoning, not just the "
      "final answer's correctness, and conclude with 'Model A Wins', "
      "'Model B Wins', or 'Tie'.";
  return prompt;
}

class verdict_parse_error : public std::runtime_error {
 public:
  explicit verdict_parse_error(std::string reply)
      : std::runtime_error("no verdict phrase found in judge reply"),
        reply_(std::move(reply)) {}

  const std::string& reply() const { return reply_; }

 private:
  std::string reply_;
};

namespace detail {

// Last whole-word, case-insensitive occurrence of phrase, or npos.
inline std::size_t last_phrase_pos(const std::string& haystack,
                                   const std::string& phrase) {
  std::size_t best = std::string::npos;
  std::size_t pos = haystack.find(phrase);
  while (pos != std::string::npos) {
    const bool left_ok = pos == 0 || !is_alnum(haystack[pos - 1]);
    const std::size_t end = pos + phrase.size();
    const bool right_ok = end == haystack.size() || !is_alnum(haystack[end]);
    if (left_ok && right_ok) best = pos;
    pos = haystack.find(phrase, pos + 1);
  }
  return best;
}

}  // namespace detail

/**
 * Extracts the verdict from a judge reply. Judges conclude at the end,
 * so the last occurrence of any conclusion phrase wins. Throws
 * verdict_parse_error (carrying the reply) when no phrase is present.
 */
inline Verdict parse_verdict(const std::string& reply) {
  const std::string haystack = detail::normalize_spaces(reply);
  const std::size_t a_pos = detail::last_phrase_pos(haystack, "model a wins");
  const std::size_t b_pos = detail::last_phrase_pos(haystack, "model b wins");
  const std::size_t tie_pos = detail::last_phrase_pos(haystack, "tie");
  if (a_pos == std::string::npos && b_pos == std::string::npos &&
      tie_pos == std::string::npos)
    throw verdict_parse_error(reply);

  auto rank = [](std::size_t pos) {
    return pos == std::string::npos ? -1 : static_cast<long long>(pos);
  };
  const long long a = rank(a_pos), b = rank(b_pos), t = rank(tie_pos);
  if (a >= b && a > t) return Verdict::A;
  if (b > a && b > t) return Verdict::B;
  return Verdict::Tie;
}

/**
 * Deterministic offline judge: scores both traces with the full reward
 * suite and declares the higher total the winner, with |delta| <=
 * epsilon a tie. Antisymmetric under swapping the traces.
 */
inline Verdict mock_judge(const QAInstance& instance, std::string_view trace_a,
                          std::string_view trace_b,
                          const RewardWeights& weights,
                          const KeywordTaxonomy& taxonomy, double epsilon) {
  if (!(epsilon >= 0.0))
    throw std::invalid_argument("mock_judge: epsilon must be >= 0");
  const RewardScorer scorer(weights, taxonomy);
  const double ra = scorer.score(trace_a, instance).total;
  const double rb = scorer.score(trace_b, instance).total;
  const double delta = ra - rb;
  if (std::fabs(delta) <= epsilon) return Verdict::Tie;
  return delta > 0.0 ? Verdict::A : Verdict::B;
}

/// Full boundary pipeline for one pair: build prompt, call the client,
/// parse its reply.
inline Verdict judge_pair(JudgeClient& client, const QAInstance& instance,
                          std::string_view gold_answer_text,
                          std::string_view trace_a, std::string_view trace_b) {
  return parse_verdict(client.complete(
      build_judge_prompt(instance, gold_answer_text, trace_a, trace_b)));
}

/**
 * Tie-splitting aggregation in exact rational arithmetic: ties are
 * distributed equally, so a_rate = (a_wins + ties/2) / total, and
 * a_rate + b_rate == 1 holds exactly.
 */
inline WinRateReport aggregate_win_rate(
    const std::vector<ComparisonRecord>& records) {
  if (records.empty())
    throw std::invalid_argument("aggregate_win_rate: no records");
  WinRateReport r;
  for (const ComparisonRecord& rec : records) {
    switch (rec.verdict) {
      case Verdict::A: ++r.a_wins; break;
      case Verdict::B: ++r.b_wins; break;
      case Verdict::Tie: ++r.ties; break;
    }
  }
  r.total = static_cast<long long>(records.size());
  r.a_num = 2 * r.a_wins + r.ties;
  r.b_num = 2 * r.b_wins + r.ties;
  r.den = 2 * r.total;
  r.a_rate = static_cast<double>(r.a_num) / static_cast<double>(r.den);
  r.b_rate = static_cast<double>(r.b_num) / static_cast<double>(r.den);
  return r;
}

}  // namespace tracelab
