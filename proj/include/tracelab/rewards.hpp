#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tracelab/trace.hpp"

namespace tracelab {

// ============================================================================
// Concept extraction and semantic similarity
// ============================================================================

/**
 * Fixed stopword list used by concept extraction. Versioned with the
 * library: changing it changes every consistency score, so treat edits
 * as breaking.
 */
inline const std::set<std::string>& stopwords() {
  static const std::set<std::string> kStopwords = {
      "a",    "an",    "the",   "and",  "or",   "but",  "if",    "of",
      "in",   "on",    "at",    "to",   "for",  "with", "by",    "from",
      "as",   "is",    "are",   "was",  "were", "be",   "been",  "being",
      "it",   "its",   "this",  "that", "these", "those", "there", "here",
      "not",  "no",    "do",    "does", "did",  "has",  "have",  "had",
      "he",   "she",   "they",  "we",   "you",  "i",    "what",  "which",
      "who",  "how"};
  return kStopwords;
}

namespace detail {

inline bool is_alnum(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

inline char to_lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

inline std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](char c) { return to_lower(c); });
  return out;
}

// Lowercases and collapses every whitespace run to a single space.
inline std::string normalize_spaces(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(to_lower(c));
    }
  }
  return out;
}

}  // namespace detail

/**
 * Extracts the concept-token set of a text: maximal ASCII alphanumeric
 * runs, lowercased, deduplicated, stopwords removed. Returned sorted.
 */
inline std::vector<std::string> concept_set(std::string_view text) {
  std::set<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !stopwords().count(current)) tokens.insert(current);
    current.clear();
  };
  for (char c : text) {
    if (detail::is_alnum(c)) {
      current.push_back(detail::to_lower(c));
    } else {
      flush();
    }
  }
  flush();
  return {tokens.begin(), tokens.end()};
}

/// Size of the intersection of two sorted unique token vectors.
inline std::size_t overlap_size(const std::vector<std::string>& a,
                                const std::vector<std::string>& b) {
  std::size_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

/// Overlap similarity on precomputed concept sets: |a∩b| / max(|a|,|b|).
inline double similarity_from_sets(const std::vector<std::string>& a,
                                   const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0.0;
  return static_cast<double>(overlap_size(a, b)) /
         static_cast<double>(std::max(a.size(), b.size()));
}

/// Bounded semantic similarity in [0, 1] between two texts.
inline double semantic_similarity(std::string_view x, std::string_view y) {
  return similarity_from_sets(concept_set(x), concept_set(y));
}

// ============================================================================
// Reward weights and breakdown
// ============================================================================

/**
 * Weight coefficients of the total reward. Defaults: accuracy 5.0,
 * every other component 1.0, maximum output length 256 words.
 */
struct RewardWeights {
  double alpha_acc = 5.0;
  double alpha_format = 1.0;
  double alpha_consistency = 1.0;
  double alpha_keywords = 1.0;
  double alpha_overthink = 1.0;
  int l_max_output = 256;

  void validate() const {
    for (double w : {alpha_acc, alpha_format, alpha_consistency,
                     alpha_keywords, alpha_overthink}) {
      if (!std::isfinite(w) || w < 0.0)
        throw std::invalid_argument("RewardWeights: weights must be finite and >= 0");
    }
    if (l_max_output <= 0)
      throw std::invalid_argument("RewardWeights: l_max_output must be > 0");
  }
};

struct RewardBreakdown {
  double acc = 0.0;
  double format = 0.0;
  double consistency = 0.0;
  double pattern = 0.0;
  double logic = 0.0;
  double domain = 0.0;
  double overthink = 0.0;
  double total = 0.0;
};

// ============================================================================
// Keyword taxonomy (structured patterns, logical rigor, domain terms)
// ============================================================================

enum class RuleKind { Literal, Regex };

struct KeywordRule {
  std::string id;
  RuleKind kind = RuleKind::Literal;
  std::string expression;
  std::string category;
  double weight = 1.0;
};

struct KeywordTaxonomy {
  std::vector<KeywordRule> pattern_entries;
  std::vector<KeywordRule> logic_entries;
  std::vector<KeywordRule> domain_entries;

  void validate() const {
    std::set<std::string> ids;
    for (const auto* section :
         {&pattern_entries, &logic_entries, &domain_entries}) {
      for (const KeywordRule& rule : *section) {
        if (rule.id.empty())
          throw std::invalid_argument("KeywordTaxonomy: empty rule id");
        if (!ids.insert(rule.id).second)
          throw std::invalid_argument("KeywordTaxonomy: duplicate rule id '" +
                                      rule.id + "'");
        if (rule.expression.empty())
          throw std::invalid_argument("KeywordTaxonomy: rule '" + rule.id +
                                      "' has empty expression");
        if (!std::isfinite(rule.weight) || rule.weight < 0.0)
          throw std::invalid_argument("KeywordTaxonomy: rule '" + rule.id +
                                      "' has invalid weight");
      }
    }
  }
};

namespace detail {

inline KeywordRule literal(std::string id, std::string expr,
                           std::string category) {
  return KeywordRule{std::move(id), RuleKind::Literal, std::move(expr),
                     std::move(category), 1.0};
}

inline KeywordRule regex(std::string id, std::string expr,
                         std::string category) {
  return KeywordRule{std::move(id), RuleKind::Regex, std::move(expr),
                     std::move(category), 1.0};
}

}  // namespace detail

/**
 * Built-in taxonomy: structured analytical patterns, logical rigor and
 * causal reasoning markers, and audio domain vocabulary. Literal entries
 * match case-insensitively on whole phrases; numbered-list detection
 * uses regex rules.
 */
inline KeywordTaxonomy default_taxonomy() {
  using detail::literal;
  using detail::regex;
  KeywordTaxonomy t;

  const std::string seq = "sequential_organization";
  t.pattern_entries.push_back(literal("first", "first", seq));
  t.pattern_entries.push_back(literal("second", "second", seq));
  t.pattern_entries.push_back(literal("then", "then", seq));
  t.pattern_entries.push_back(literal("next", "next", seq));
  t.pattern_entries.push_back(literal("finally", "finally", seq));
  t.pattern_entries.push_back(literal("step_1", "step 1", seq));
  t.pattern_entries.push_back(regex("numbered_1", R"(\b1\.)", seq));
  t.pattern_entries.push_back(regex("numbered_2", R"(\b2\.)", seq));
  const std::string cmp = "comparative_analysis";
  t.pattern_entries.push_back(literal("rather_than", "rather than", cmp));
  t.pattern_entries.push_back(literal("compared_to", "compared to", cmp));
  t.pattern_entries.push_back(literal("in_contrast_to", "in contrast to", cmp));
  t.pattern_entries.push_back(
      literal("on_the_other_hand", "on the other hand", cmp));
  const std::string sys = "systematic_evaluation";
  t.pattern_entries.push_back(
      literal("considering_the_options", "considering the options", sys));
  t.pattern_entries.push_back(
      literal("evaluating_each_choice", "evaluating each choice", sys));
  t.pattern_entries.push_back(
      literal("among_the_options", "among the options", sys));
  const std::string just = "explicit_justification";
  t.pattern_entries.push_back(literal("most_suitable", "most suitable", just));
  t.pattern_entries.push_back(literal("the_best_fit", "the best fit", just));
  t.pattern_entries.push_back(
      literal("fits_the_description_best", "fits the description best", just));

  const std::string ded = "premise_deduction";
  t.logic_entries.push_back(literal("given", "given", ded));
  t.logic_entries.push_back(literal("based_on", "based on", ded));
  t.logic_entries.push_back(literal("since", "since", ded));
  t.logic_entries.push_back(literal("therefore", "therefore", ded));
  t.logic_entries.push_back(literal("thus", "thus", ded));
  t.logic_entries.push_back(literal("hence", "hence", ded));
  t.logic_entries.push_back(literal("so", "so", ded));
  const std::string evid = "evidential_support";
  t.logic_entries.push_back(literal("indicates", "indicates", evid));
  t.logic_entries.push_back(literal("suggests", "suggests", evid));
  t.logic_entries.push_back(
      literal("is_consistent_with", "is consistent with", evid));
  t.logic_entries.push_back(
      literal("as_evidenced_by", "as evidenced by", evid));
  const std::string hyp = "hypothetical_reasoning";
  t.logic_entries.push_back(literal("assume", "assume", hyp));
  t.logic_entries.push_back(literal("suppose", "suppose", hyp));
  t.logic_entries.push_back(literal("typically", "typically", hyp));
  t.logic_entries.push_back(literal("generally", "generally", hyp));
  t.logic_entries.push_back(
      literal("it_is_likely_that", "it is likely that", hyp));

  const std::string ac = "acoustic_properties";
  for (const char* w : {"sound", "audio", "noise", "pitch", "volume", "timbre",
                        "rhythm", "frequency"})
    t.domain_entries.push_back(literal(w, w, ac));
  const std::string env = "environmental_animal_sounds";
  for (const char* w :
       {"bell", "ring", "hooves", "engine", "siren", "animal", "clip-clop",
        "moo"})
    t.domain_entries.push_back(literal(w, w, env));
  const std::string mus = "musical_concepts";
  for (const char* w : {"chord", "note", "melody", "harmony", "instrument",
                        "major", "minor", "p5"})
    t.domain_entries.push_back(literal(w, w, mus));
  const std::string sp = "speech_analysis";
  for (const char* w : {"voice", "speech", "tone", "intonation", "male",
                        "female", "shouting", "whisper"})
    t.domain_entries.push_back(literal(w, w, sp));

  return t;
}

struct KeywordScores {
  double pattern = 0.0;
  double logic = 0.0;
  double domain = 0.0;

  double sum() const { return pattern + logic + domain; }
};

/**
 * Compiled form of a taxonomy. Each entry fires at most once per text
 * regardless of repetitions; literal phrases require non-alphanumeric
 * (or edge) boundaries so that e.g. "so" never fires inside "sound".
 */
class KeywordMatcher {
 public:
  explicit KeywordMatcher(const KeywordTaxonomy& taxonomy) {
    taxonomy.validate();
    compile(taxonomy.pattern_entries, pattern_);
    compile(taxonomy.logic_entries, logic_);
    compile(taxonomy.domain_entries, domain_);
  }

  KeywordScores score(std::string_view think) const {
    const std::string haystack = detail::normalize_spaces(think);
    KeywordScores s;
    s.pattern = section_score(pattern_, haystack);
    s.logic = section_score(logic_, haystack);
    s.domain = section_score(domain_, haystack);
    return s;
  }

 private:
  struct Compiled {
    RuleKind kind;
    std::string phrase;  // normalized literal phrase
    std::regex re;
    double weight;
  };

  static void compile(const std::vector<KeywordRule>& rules,
                      std::vector<Compiled>& out) {
    out.reserve(rules.size());
    for (const KeywordRule& rule : rules) {
      Compiled c;
      c.kind = rule.kind;
      c.weight = rule.weight;
      if (rule.kind == RuleKind::Literal) {
        c.phrase = detail::normalize_spaces(rule.expression);
      } else {
        c.re.assign(rule.expression,
                    std::regex::ECMAScript | std::regex::icase);
      }
      out.push_back(std::move(c));
    }
  }

  static bool phrase_found(const std::string& haystack,
                           const std::string& phrase) {
    std::size_t pos = haystack.find(phrase);
    while (pos != std::string::npos) {
      const bool left_ok = !detail::is_alnum(phrase.front()) || pos == 0 ||
                           !detail::is_alnum(haystack[pos - 1]);
      const std::size_t end = pos + phrase.size();
      const bool right_ok = !detail::is_alnum(phrase.back()) ||
                            end == haystack.size() ||
                            !detail::is_alnum(haystack[end]);
      if (left_ok && right_ok) return true;
      pos = haystack.find(phrase, pos + 1);
    }
    return false;
  }

  static double section_score(const std::vector<Compiled>& rules,
                              const std::string& haystack) {
    double score = 0.0;
    for (const Compiled& rule : rules) {
      const bool hit = rule.kind == RuleKind::Literal
                           ? phrase_found(haystack, rule.phrase)
                           : std::regex_search(haystack, rule.re);
      if (hit) score += rule.weight;
    }
    return score;
  }

  std::vector<Compiled> pattern_;
  std::vector<Compiled> logic_;
  std::vector<Compiled> domain_;
};

// ============================================================================
// Reward components
// ============================================================================

/// Trim + collapse whitespace + casefold; used for answer matching.
inline std::string normalize_answer(std::string_view text) {
  return detail::normalize_spaces(text);
}

/**
 * Resolves an answer text to a choice index, or -1. Single letters A-D
 * select the choice at that index; otherwise the normalized text is
 * compared against each normalized choice text.
 */
inline int resolve_answer_index(std::string_view answer,
                                const QAInstance& instance) {
  const std::string norm = normalize_answer(answer);
  if (norm.size() == 1 && norm[0] >= 'a' && norm[0] <= 'd')
    return norm[0] - 'a';
  for (std::size_t i = 0; i < instance.choices.size(); ++i) {
    if (norm == normalize_answer(instance.choices[i].text))
      return static_cast<int>(i);
  }
  return -1;
}

/// R_acc: 1 iff the trace's answer resolves to the gold choice.
inline int accuracy_reward(const ParsedTrace& trace,
                           const QAInstance& instance) {
  if (trace.answer.empty()) return 0;
  return resolve_answer_index(trace.answer, instance) == instance.gold_index
             ? 1
             : 0;
}

/// R_format: 1 iff the trace has the strict two-segment structure.
inline int format_reward(const ParsedTrace& trace) {
  return trace.format_valid ? 1 : 0;
}

/// Question context Q: question text plus all four choice texts.
inline std::string question_context(const QAInstance& instance) {
  std::string q = instance.question;
  for (const Choice& c : instance.choices) {
    q.push_back(' ');
    q.append(c.text);
  }
  return q;
}

/**
 * R_consistency in [0, 2]: think-answer alignment plus think-question
 * alignment, each a bounded overlap similarity.
 */
inline double consistency_reward(const ParsedTrace& trace,
                                 const QAInstance& instance) {
  const auto think_concepts = concept_set(trace.think);
  return similarity_from_sets(think_concepts, concept_set(trace.answer)) +
         similarity_from_sets(think_concepts,
                              concept_set(question_context(instance)));
}

/// R_pattern/R_logic/R_domain for a think text under a taxonomy.
inline KeywordScores keyword_reward(std::string_view think,
                                    const KeywordTaxonomy& taxonomy) {
  return KeywordMatcher(taxonomy).score(think);
}

/**
 * R_overthinking: 1 - think_len / l_max. Linear, deliberately not
 * clamped below zero; budgets are enforced by the sampler, not here.
 */
inline double overthinking_penalty(int think_len, int l_max) {
  if (l_max <= 0)
    throw std::invalid_argument("overthinking_penalty: l_max must be > 0");
  if (think_len < 0)
    throw std::invalid_argument("overthinking_penalty: negative think_len");
  return 1.0 - static_cast<double>(think_len) / static_cast<double>(l_max);
}

// ============================================================================
// Total reward
// ============================================================================

/**
 * Scores raw traces against instances under fixed weights and a compiled
 * taxonomy. Pure; one instance may score any number of traces.
 */
class RewardScorer {
 public:
  RewardScorer(RewardWeights weights, const KeywordTaxonomy& taxonomy)
      : weights_(weights), matcher_(taxonomy) {
    weights_.validate();
  }

  const RewardWeights& weights() const { return weights_; }

  RewardBreakdown score(std::string_view raw,
                        const QAInstance& instance) const {
    const ParsedTrace trace = parse_trace(raw);
    RewardBreakdown b;
    b.acc = accuracy_reward(trace, instance);
    b.format = format_reward(trace);
    b.consistency = consistency_reward(trace, instance);
    const KeywordScores k = matcher_.score(trace.think);
    b.pattern = k.pattern;
    b.logic = k.logic;
    b.domain = k.domain;
    b.overthink = overthinking_penalty(think_length(trace),
                                       weights_.l_max_output);
    b.total = weights_.alpha_acc * b.acc + weights_.alpha_format * b.format +
              weights_.alpha_consistency * b.consistency +
              weights_.alpha_keywords * (b.pattern + b.logic + b.domain) +
              weights_.alpha_overthink * b.overthink;
    return b;
  }

 private:
  RewardWeights weights_;
  KeywordMatcher matcher_;
};

/// One-shot multi-faceted reward for a raw trace.
inline RewardBreakdown total_reward(std::string_view raw,
                                    const QAInstance& instance,
                                    const RewardWeights& weights,
                                    const KeywordTaxonomy& taxonomy) {
  return RewardScorer(weights, taxonomy).score(raw, instance);
}

}  // namespace tracelab
