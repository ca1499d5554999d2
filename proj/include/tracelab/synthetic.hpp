#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracelab/policy.hpp"
#include "tracelab/rewards.hpp"
#include "tracelab/rng.hpp"
#include "tracelab/trace.hpp"

namespace tracelab {

// ============================================================================
// Synthetic dataset
// ============================================================================

namespace detail {

// Draws `count` distinct indices from [0, n) into out.
inline std::vector<std::size_t> draw_distinct(rng::Stream& stream,
                                              std::size_t n,
                                              std::size_t count) {
  if (count > n)
    throw std::invalid_argument("draw_distinct: count exceeds population");
  std::vector<std::size_t> out;
  out.reserve(count);
  std::set<std::size_t> seen;
  while (out.size() < count) {
    std::size_t idx = stream.uniform_index(n);
    if (seen.insert(idx).second) out.push_back(idx);
  }
  return out;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out.append(words[i]);
  }
  return out;
}

}  // namespace detail

inline constexpr std::size_t kCaptionConcepts = 6;
inline constexpr std::size_t kChoiceConcepts = 4;
inline constexpr std::size_t kGoldCaptionOverlap = 3;
inline constexpr std::size_t kMinVocabSize = 16;

/// Brute-force check of the unique-gold invariant: the gold choice
/// strictly maximizes caption overlap.
inline bool has_unique_gold(const QAInstance& instance) {
  const auto caption = detail::sorted_unique(instance.caption);
  std::array<std::size_t, kNumChoices> ov{};
  for (int c = 0; c < kNumChoices; ++c)
    ov[c] = overlap_size(caption,
                         detail::sorted_unique(instance.choices[c].concepts));
  for (int c = 0; c < kNumChoices; ++c)
    if (c != instance.gold_index && ov[c] >= ov[instance.gold_index])
      return false;
  return true;
}

/**
 * Generates n synthetic QA instances over a vocabulary of `vocab_size`
 * concept tokens ("w0", "w1", ...). Captions hold 6 concepts; the gold
 * choice shares 3 of them, distractors at most 1, which makes the gold
 * the unique caption-overlap maximizer by construction.
 */
inline std::vector<QAInstance> generate_dataset(std::uint64_t seed, int n,
                                                std::size_t vocab_size = 64) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  if (vocab_size < kMinVocabSize)
    throw std::invalid_argument(
        "generate_dataset: vocab too small for unique-gold construction");

  std::vector<std::string> vocab(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i)
    vocab[i] = "w" + std::to_string(i);

  rng::Stream stream = rng::derive_stream(seed, "synthetic.dataset");
  std::vector<QAInstance> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    QAInstance inst;
    inst.id = "q" + std::to_string(i);
    inst.question = "What is the main source of sound in the audio?";
    inst.gold_index = static_cast<int>(stream.uniform_index(kNumChoices));

    const auto caption_idx =
        detail::draw_distinct(stream, vocab_size, kCaptionConcepts);
    std::set<std::size_t> caption_set(caption_idx.begin(), caption_idx.end());
    for (std::size_t idx : caption_idx) inst.caption.push_back(vocab[idx]);
    inst.caption = detail::sorted_unique(inst.caption);

    // Off-caption pool for the remaining concept draws.
    std::vector<std::size_t> off_caption;
    off_caption.reserve(vocab_size - kCaptionConcepts);
    for (std::size_t idx = 0; idx < vocab_size; ++idx)
      if (!caption_set.count(idx)) off_caption.push_back(idx);

    inst.choices.resize(kNumChoices);
    for (int c = 0; c < kNumChoices; ++c) {
      std::vector<std::string> concepts;
      if (c == inst.gold_index) {
        const auto from_caption = detail::draw_distinct(
            stream, caption_idx.size(), kGoldCaptionOverlap);
        for (std::size_t k : from_caption)
          concepts.push_back(vocab[caption_idx[k]]);
        const auto extra = detail::draw_distinct(
            stream, off_caption.size(), kChoiceConcepts - kGoldCaptionOverlap);
        for (std::size_t k : extra) concepts.push_back(vocab[off_caption[k]]);
      } else {
        const std::size_t from_caption = stream.uniform_index(2);  // 0 or 1
        if (from_caption == 1) {
          concepts.push_back(vocab[caption_idx[stream.uniform_index(
              caption_idx.size())]]);
        }
        const auto extra = detail::draw_distinct(
            stream, off_caption.size(), kChoiceConcepts - from_caption);
        for (std::size_t k : extra) concepts.push_back(vocab[off_caption[k]]);
      }
      inst.choices[c].concepts = detail::sorted_unique(std::move(concepts));
      inst.choices[c].text = detail::join_words(inst.choices[c].concepts);
    }

    inst.validate();
    if (!has_unique_gold(inst))
      throw std::runtime_error(
          "generate_dataset: unique-gold construction failed for " + inst.id);
    out.push_back(std::move(inst));
  }
  return out;
}

// ============================================================================
// Answer-invariant augmentation templates
// ============================================================================

/**
 * Question-rephrasing templates. Each pattern carries a {choices} slot
 * filled with the comma-joined choice texts; audio proxy, choices, and
 * gold index are untouched, so every variant is answer-invariant.
 */
struct TemplateSet {
  std::vector<std::string> templates;

  static TemplateSet defaults() {
    return TemplateSet{{
        "Which sound source appears most prominently in the temporal "
        "sequence: {choices}?",
        "Which option has the highest occurrence frequency among: "
        "{choices}?",
        "Which sound demonstrates the strongest relationship with other "
        "audio elements: {choices}?",
    }};
  }

  void validate() const {
    if (templates.empty())
      throw std::invalid_argument("TemplateSet: no templates");
    for (const std::string& t : templates) {
      if (t.find("{choices}") == std::string::npos)
        throw std::invalid_argument("TemplateSet: template missing {choices} slot");
    }
  }
};

/// One rephrased variant per template; ids get a ".t<k>" suffix.
inline std::vector<QAInstance> augment(const QAInstance& instance,
                                       const TemplateSet& templates) {
  templates.validate();
  std::string choices_text;
  for (int c = 0; c < kNumChoices; ++c) {
    if (c > 0) choices_text += ", ";
    choices_text += instance.choices[c].text;
  }
  std::vector<QAInstance> out;
  out.reserve(templates.templates.size());
  for (std::size_t k = 0; k < templates.templates.size(); ++k) {
    QAInstance variant = instance;
    variant.id = instance.id + ".t" + std::to_string(k);
    std::string q = templates.templates[k];
    const std::size_t slot = q.find("{choices}");
    q.replace(slot, std::string("{choices}").size(), choices_text);
    variant.question = std::move(q);
    out.push_back(std::move(variant));
  }
  return out;
}

// ============================================================================
// Reasoning-answer agreement diagnostic
// ============================================================================

/**
 * 1 iff the choice whose concepts best overlap the think text equals
 * the answered choice. Ties (including an empty think) give 0: the
 * reasoning shows no clear support.
 */
inline int reasoning_answer_agreement(const ParsedTrace& trace,
                                      const QAInstance& instance) {
  const int answered = resolve_answer_index(trace.answer, instance);
  if (answered < 0) return 0;
  const auto think_concepts = concept_set(trace.think);
  std::array<std::size_t, kNumChoices> ov{};
  for (int c = 0; c < kNumChoices; ++c)
    ov[c] = overlap_size(think_concepts,
                         detail::sorted_unique(instance.choices[c].concepts));
  const std::size_t best = *std::max_element(ov.begin(), ov.end());
  if (std::count(ov.begin(), ov.end(), best) != 1) return 0;
  const int supported = static_cast<int>(
      std::max_element(ov.begin(), ov.end()) - ov.begin());
  return supported == answered ? 1 : 0;
}

}  // namespace tracelab
