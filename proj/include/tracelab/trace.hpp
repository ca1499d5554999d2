#pragma once

#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracelab {

/**
 * One multiple-choice QA instance. The audio input is proxied by a set
 * of caption concept tokens; every choice carries its own concept set.
 * Concept vectors are kept sorted and deduplicated.
 */
struct Choice {
  std::string text;
  std::vector<std::string> concepts;
};

struct QAInstance {
  std::string id;
  std::vector<std::string> caption;
  std::string question;
  std::vector<Choice> choices;  // exactly 4
  int gold_index = 0;

  void validate() const {
    if (choices.size() != 4)
      throw std::invalid_argument("QAInstance " + id +
                                  ": expected exactly 4 choices");
    if (gold_index < 0 || gold_index > 3)
      throw std::invalid_argument("QAInstance " + id +
                                  ": gold_index out of range");
    if (caption.empty())
      throw std::invalid_argument("QAInstance " + id + ": empty caption");
    for (const Choice& c : choices) {
      if (c.concepts.empty())
        throw std::invalid_argument("QAInstance " + id +
                                    ": choice with empty concept set");
    }
  }
};

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

/**
 * A model output split into its think and answer segments.
 *
 * format_valid is true iff the raw text is exactly one think segment
 * followed by one answer segment, with nothing but whitespace outside
 * the tags. Invalid inputs still carry a best-effort extraction of the
 * first think and first answer segment.
 */
struct ParsedTrace {
  std::string think;
  std::string answer;
  std::string raw;
  bool format_valid = false;
};

namespace detail {

inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline std::size_t count_occurrences(std::string_view haystack,
                                     std::string_view needle) {
  std::size_t count = 0;
  std::size_t pos = haystack.find(needle);
  while (pos != std::string_view::npos) {
    ++count;
    pos = haystack.find(needle, pos + 1);
  }
  return count;
}

// Extracts the first open...close segment, or empty when absent.
inline std::string first_segment(std::string_view raw, std::string_view open,
                                 std::string_view close) {
  std::size_t start = raw.find(open);
  if (start == std::string_view::npos) return {};
  start += open.size();
  std::size_t end = raw.find(close, start);
  if (end == std::string_view::npos) return {};
  return std::string(raw.substr(start, end - start));
}

inline bool all_whitespace(std::string_view s) {
  for (char c : s) {
    if (!is_space(c)) return false;
  }
  return true;
}

}  // namespace detail

/**
 * Splits raw model output into think/answer segments. Total: never
 * fails; structural problems are reported through format_valid.
 */
inline ParsedTrace parse_trace(std::string_view raw) {
  ParsedTrace out;
  out.raw = std::string(raw);
  out.think = detail::first_segment(raw, kThinkOpen, kThinkClose);
  out.answer = detail::first_segment(raw, kAnswerOpen, kAnswerClose);

  // Strict shape: ws <think>..</think> ws <answer>..</answer> ws, with
  // each tag appearing exactly once.
  if (detail::count_occurrences(raw, kThinkOpen) != 1 ||
      detail::count_occurrences(raw, kThinkClose) != 1 ||
      detail::count_occurrences(raw, kAnswerOpen) != 1 ||
      detail::count_occurrences(raw, kAnswerClose) != 1) {
    return out;
  }
  std::size_t think_open = raw.find(kThinkOpen);
  std::size_t think_close = raw.find(kThinkClose);
  std::size_t answer_open = raw.find(kAnswerOpen);
  std::size_t answer_close = raw.find(kAnswerClose);
  if (!(think_open < think_close && think_close < answer_open &&
        answer_open < answer_close)) {
    return out;
  }
  if (!detail::all_whitespace(raw.substr(0, think_open))) return out;
  std::size_t between = think_close + kThinkClose.size();
  if (!detail::all_whitespace(raw.substr(between, answer_open - between)))
    return out;
  if (!detail::all_whitespace(raw.substr(answer_close + kAnswerClose.size())))
    return out;

  out.format_valid = true;
  return out;
}

/**
 * Renders think/answer into the tagged two-segment format. Throws
 * std::invalid_argument when a field embeds a tag delimiter, since that
 * would break the parse/render round trip.
 */
inline std::string render_trace(std::string_view think,
                                std::string_view answer) {
  for (std::string_view field : {think, answer}) {
    for (std::string_view tag :
         {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
      if (field.find(tag) != std::string_view::npos) {
        throw std::invalid_argument(
            "render_trace: field embeds tag delimiter '" + std::string(tag) +
            "'");
      }
    }
  }
  std::string out;
  out.reserve(think.size() + answer.size() + 32);
  out.append(kThinkOpen).append(think).append(kThinkClose);
  out.append(kAnswerOpen).append(answer).append(kAnswerClose);
  return out;
}

inline std::string render_trace(const ParsedTrace& trace) {
  return render_trace(trace.think, trace.answer);
}

/// Number of whitespace-delimited words in a piece of text.
inline int word_count(std::string_view text) {
  int count = 0;
  bool in_word = false;
  for (char c : text) {
    if (detail::is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

/// Reasoning length |t|: whitespace-delimited words in the think segment.
inline int think_length(const ParsedTrace& trace) {
  return word_count(trace.think);
}

}  // namespace tracelab
