#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracelab/rng.hpp"
#include "tracelab/trace.hpp"

namespace tracelab {

// ============================================================================
// Softmax utilities
// ============================================================================

inline std::vector<double> log_softmax(const std::vector<double>& logits) {
  if (logits.empty())
    throw std::invalid_argument("log_softmax: empty logits");
  double max_logit = logits[0];
  for (double v : logits) max_logit = std::max(max_logit, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - max_logit);
  const double log_z = max_logit + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

// ============================================================================
// Toy policy over Eq.-style tagged traces
// ============================================================================

/// Think-length buckets, in words. Fixed and few so the policy stays
/// exhaustively enumerable in tests.
inline constexpr std::array<int, 6> kLengthBuckets{0, 4, 8, 16, 32, 64};

/// What the policy may emit at each think slot.
enum class EmissionCategory : int {
  CaptionConcept = 0,
  GoldChoiceConcept = 1,
  DistractorChoiceConcept = 2,
  PatternKeyword = 3,
  LogicKeyword = 4,
  DomainKeyword = 5,
  NoiseToken = 6,
};
inline constexpr int kNumEmissionCategories = 7;
inline constexpr int kNumChoices = 4;

/**
 * Factorized categorical policy: a length head over the word buckets,
 * an emission head over the per-slot categories, and an answer head
 * that scores each choice by concept overlap with the emitted think
 * (plus a caption echo), divided by a temperature, plus a bias.
 *
 * Trainable parameters are the length logits, emission logits, and
 * answer bias (17 values); the temperature is a fixed hyperparameter.
 */
struct ToyPolicy {
  std::vector<double> length_logits = std::vector<double>(kLengthBuckets.size(), 0.0);
  std::vector<double> emission_logits = std::vector<double>(kNumEmissionCategories, 0.0);
  double answer_temperature = 1.0;
  std::vector<double> answer_bias = std::vector<double>(kNumChoices, 0.0);

  static ToyPolicy uniform() { return ToyPolicy{}; }

  void validate() const {
    if (length_logits.size() != kLengthBuckets.size())
      throw std::invalid_argument("ToyPolicy: length_logits must have 6 entries");
    if (emission_logits.size() != static_cast<std::size_t>(kNumEmissionCategories))
      throw std::invalid_argument("ToyPolicy: emission_logits must have 7 entries");
    if (answer_bias.size() != static_cast<std::size_t>(kNumChoices))
      throw std::invalid_argument("ToyPolicy: answer_bias must have 4 entries");
    if (!(answer_temperature > 0.0) || !std::isfinite(answer_temperature))
      throw std::invalid_argument("ToyPolicy: answer_temperature must be > 0");
    for (const auto* v : {&length_logits, &emission_logits, &answer_bias}) {
      for (double x : *v)
        if (!std::isfinite(x))
          throw std::invalid_argument("ToyPolicy: non-finite logit");
    }
  }

  static constexpr std::size_t param_count() {
    return kLengthBuckets.size() + kNumEmissionCategories + kNumChoices;
  }

  std::vector<double> params() const {
    std::vector<double> p;
    p.reserve(param_count());
    p.insert(p.end(), length_logits.begin(), length_logits.end());
    p.insert(p.end(), emission_logits.begin(), emission_logits.end());
    p.insert(p.end(), answer_bias.begin(), answer_bias.end());
    return p;
  }

  void set_params(const std::vector<double>& p) {
    if (p.size() != param_count())
      throw std::invalid_argument("ToyPolicy::set_params: wrong size");
    std::size_t k = 0;
    for (double& v : length_logits) v = p[k++];
    for (double& v : emission_logits) v = p[k++];
    for (double& v : answer_bias) v = p[k++];
  }
};

/**
 * Hallucination model: the probability that the word at position j is
 * replaced by a distractor-choice concept is min(1, p0 + g*j), so
 * corruption accumulates along the chain.
 */
struct NoiseModel {
  double base_corruption = 0.0;  // p0
  double growth = 0.0;           // g, per-word position increment

  double corruption_at(int position) const {
    return std::min(1.0, base_corruption + growth * position);
  }

  void validate() const {
    if (!(base_corruption >= 0.0 && base_corruption <= 1.0))
      throw std::invalid_argument("NoiseModel: base_corruption must be in [0,1]");
    if (!(growth >= 0.0) || !std::isfinite(growth))
      throw std::invalid_argument("NoiseModel: growth must be >= 0");
  }
};

// ============================================================================
// Emission pools
// ============================================================================

namespace detail {

inline std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace detail

/// Single-word keyword vocabularies used by the emitter, drawn from the
/// built-in taxonomy's space-free literal entries.
inline const std::vector<std::string>& pattern_keyword_pool() {
  static const std::vector<std::string> kPool = {"first", "second", "then",
                                                 "next", "finally"};
  return kPool;
}

inline const std::vector<std::string>& logic_keyword_pool() {
  static const std::vector<std::string> kPool = {
      "given",   "since",   "therefore", "thus",      "hence",    "so",
      "indicates", "suggests", "assume",  "suppose",   "typically", "generally"};
  return kPool;
}

inline const std::vector<std::string>& domain_keyword_pool() {
  static const std::vector<std::string> kPool = {
      "sound",  "audio",   "noise",     "pitch",      "volume", "timbre",
      "rhythm", "frequency", "bell",    "ring",       "hooves", "engine",
      "siren",  "animal",  "clip-clop", "moo",        "chord",  "note",
      "melody", "harmony", "instrument", "major",     "minor",  "p5",
      "voice",  "speech",  "tone",      "intonation", "male",   "female",
      "shouting", "whisper"};
  return kPool;
}

/// Filler tokens with no overlap with concepts or keywords.
inline const std::vector<std::string>& noise_token_pool() {
  static const std::vector<std::string> kPool = [] {
    std::vector<std::string> v;
    for (int i = 0; i < 16; ++i) v.push_back("nz" + std::to_string(i));
    return v;
  }();
  return kPool;
}

/**
 * Per-instance token pools for each emission category. Instance pools
 * are sorted so sampling is order-deterministic.
 */
class EmissionPools {
 public:
  explicit EmissionPools(const QAInstance& instance) {
    instance.validate();
    caption_ = detail::sorted_unique(instance.caption);
    gold_ = detail::sorted_unique(instance.choices[instance.gold_index].concepts);
    std::vector<std::string> distractors;
    for (int c = 0; c < kNumChoices; ++c) {
      if (c == instance.gold_index) continue;
      distractors.insert(distractors.end(), instance.choices[c].concepts.begin(),
                         instance.choices[c].concepts.end());
    }
    distractor_ = detail::sorted_unique(std::move(distractors));
  }

  const std::vector<std::string>& pool(EmissionCategory category) const {
    switch (category) {
      case EmissionCategory::CaptionConcept: return caption_;
      case EmissionCategory::GoldChoiceConcept: return gold_;
      case EmissionCategory::DistractorChoiceConcept: return distractor_;
      case EmissionCategory::PatternKeyword: return pattern_keyword_pool();
      case EmissionCategory::LogicKeyword: return logic_keyword_pool();
      case EmissionCategory::DomainKeyword: return domain_keyword_pool();
      case EmissionCategory::NoiseToken: return noise_token_pool();
    }
    throw std::invalid_argument("EmissionPools: unknown category");
  }

  const std::vector<std::string>& distractor_pool() const { return distractor_; }

 private:
  std::vector<std::string> caption_;
  std::vector<std::string> gold_;
  std::vector<std::string> distractor_;
};

// ============================================================================
// Sampling and exact log-probabilities
// ============================================================================

/**
 * The categorical decisions the policy made for one sample. Noise
 * corruption events are environment randomness, not policy decisions,
 * so they are not part of the path.
 */
struct DecisionPath {
  int length_bucket = 0;            // index into kLengthBuckets
  std::vector<int> categories;      // one emission category per slot
  std::vector<int> token_indices;   // index into the category's pool
  int answer_index = 0;
};

struct SampleResult {
  std::string raw;                       // rendered tagged trace
  std::string think;
  std::string answer;
  std::vector<std::string> think_words;  // post-corruption words
  DecisionPath path;
  double logprob = 0.0;                  // sum over policy decisions
};

/**
 * Answer-head scores for each choice: overlap of (emitted think words
 * union caption) with the choice's concepts, over temperature, plus bias.
 * The caption echo keeps direct answering informative at zero budget.
 */
inline std::vector<double> answer_scores(
    const ToyPolicy& policy, const QAInstance& instance,
    const std::vector<std::string>& think_words) {
  std::set<std::string> support(think_words.begin(), think_words.end());
  support.insert(instance.caption.begin(), instance.caption.end());
  std::vector<double> scores(kNumChoices);
  for (int c = 0; c < kNumChoices; ++c) {
    int overlap = 0;
    for (const std::string& token : instance.choices[c].concepts)
      if (support.count(token)) ++overlap;
    scores[c] = static_cast<double>(overlap) / policy.answer_temperature +
                policy.answer_bias[c];
  }
  return scores;
}

/**
 * Exact log-probability of a decision path under a policy. think_words
 * must be the final (post-corruption) words: the answer head conditions
 * on what was actually written.
 */
inline double path_logprob(const ToyPolicy& policy, const QAInstance& instance,
                           const EmissionPools& pools, const DecisionPath& path,
                           const std::vector<std::string>& think_words) {
  policy.validate();
  if (path.categories.size() != path.token_indices.size() ||
      path.categories.size() != think_words.size())
    throw std::invalid_argument("path_logprob: inconsistent path");
  double lp = log_softmax(policy.length_logits)[path.length_bucket];
  if (!path.categories.empty()) {
    const std::vector<double> em = log_softmax(policy.emission_logits);
    for (std::size_t j = 0; j < path.categories.size(); ++j) {
      const int cat = path.categories[j];
      lp += em[cat];
      const auto& pool = pools.pool(static_cast<EmissionCategory>(cat));
      lp -= std::log(static_cast<double>(pool.size()));
    }
  }
  lp += log_softmax(answer_scores(policy, instance, think_words))[path.answer_index];
  return lp;
}

/**
 * Draws one tagged response. Per slot: an emission category, a uniform
 * token from its pool, then a position-dependent corruption check that
 * may overwrite the word with a distractor concept. The answer is
 * sampled from the overlap-scored head over the final think words.
 */
inline SampleResult sample_response(const ToyPolicy& policy,
                                    const QAInstance& instance,
                                    int max_think_len, const NoiseModel& noise,
                                    rng::Stream& stream) {
  policy.validate();
  noise.validate();
  if (max_think_len < 0)
    throw std::invalid_argument("sample_response: negative max_think_len");
  const EmissionPools pools(instance);

  SampleResult result;
  result.path.length_bucket =
      static_cast<int>(stream.categorical(softmax(policy.length_logits)));
  const int realized =
      std::min(kLengthBuckets[result.path.length_bucket], max_think_len);

  const std::vector<double> em_probs = softmax(policy.emission_logits);
  result.think_words.reserve(realized);
  for (int j = 0; j < realized; ++j) {
    const int cat = static_cast<int>(stream.categorical(em_probs));
    const auto& pool = pools.pool(static_cast<EmissionCategory>(cat));
    const int tok = static_cast<int>(stream.uniform_index(pool.size()));
    result.path.categories.push_back(cat);
    result.path.token_indices.push_back(tok);
    std::string word = pool[tok];
    if (stream.next_double01() < noise.corruption_at(j)) {
      const auto& dpool = pools.distractor_pool();
      word = dpool[stream.uniform_index(dpool.size())];
    }
    result.think_words.push_back(std::move(word));
  }

  for (std::size_t j = 0; j < result.think_words.size(); ++j) {
    if (j > 0) result.think.push_back(' ');
    result.think.append(result.think_words[j]);
  }

  const std::vector<double> scores =
      answer_scores(policy, instance, result.think_words);
  result.path.answer_index = static_cast<int>(stream.categorical(softmax(scores)));
  result.answer = instance.choices[result.path.answer_index].text;
  result.raw = render_trace(result.think, result.answer);
  result.logprob =
      path_logprob(policy, instance, pools, result.path, result.think_words);
  return result;
}

// ============================================================================
// Analytic gradients
// ============================================================================

/// Gradient vector layout: [0..5] length logits, [6..12] emission
/// logits, [13..16] answer bias.
using GradVec = std::vector<double>;

inline GradVec zero_grad() { return GradVec(ToyPolicy::param_count(), 0.0); }

/**
 * Adds coeff * d(log pi(path)) / d(params) to grad. Uniform token draws
 * contribute nothing; each categorical head contributes one-hot minus
 * softmax.
 */
inline void accumulate_logprob_grad(const ToyPolicy& policy,
                                    const QAInstance& instance,
                                    const DecisionPath& path,
                                    const std::vector<std::string>& think_words,
                                    double coeff, GradVec& grad) {
  const std::size_t n_len = kLengthBuckets.size();
  const std::vector<double> p_len = softmax(policy.length_logits);
  for (std::size_t i = 0; i < n_len; ++i) {
    const double onehot = (static_cast<int>(i) == path.length_bucket) ? 1.0 : 0.0;
    grad[i] += coeff * (onehot - p_len[i]);
  }
  if (!path.categories.empty()) {
    const std::vector<double> p_em = softmax(policy.emission_logits);
    std::vector<double> counts(kNumEmissionCategories, 0.0);
    for (int cat : path.categories) counts[cat] += 1.0;
    const double slots = static_cast<double>(path.categories.size());
    for (int i = 0; i < kNumEmissionCategories; ++i)
      grad[n_len + i] += coeff * (counts[i] - slots * p_em[i]);
  }
  const std::vector<double> p_ans =
      softmax(answer_scores(policy, instance, think_words));
  for (int i = 0; i < kNumChoices; ++i) {
    const double onehot = (i == path.answer_index) ? 1.0 : 0.0;
    grad[n_len + kNumEmissionCategories + i] += coeff * (onehot - p_ans[i]);
  }
}

}  // namespace tracelab
