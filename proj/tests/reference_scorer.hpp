#pragma once

// Test-only reference implementation of the reward suite, deliberately
// written along an independent path (regex tokenization and matching,
// std::set arithmetic, its own format checker) to cross-check the
// library scorer field by field.

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "tracelab/trace.hpp"

namespace refscore {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

inline const std::set<std::string>& stop_list() {
  static const std::set<std::string> kList = {
      "a",    "an",    "the",   "and",  "or",    "but",   "if",    "of",
      "in",   "on",    "at",    "to",   "for",   "with",  "by",    "from",
      "as",   "is",    "are",   "was",  "were",  "be",    "been",  "being",
      "it",   "its",   "this",  "that", "these", "those", "there", "here",
      "not",  "no",    "do",    "does", "did",   "has",   "have",  "had",
      "he",   "she",   "they",  "we",   "you",   "i",     "what",  "which",
      "who",  "how"};
  return kList;
}

inline std::set<std::string> concepts(const std::string& text) {
  static const std::regex word_re("[A-Za-z0-9]+");
  std::set<std::string> out;
  const std::string low = lower(text);
  for (std::sregex_iterator it(low.begin(), low.end(), word_re), end;
       it != end; ++it) {
    const std::string token = it->str();
    if (!stop_list().count(token)) out.insert(token);
  }
  return out;
}

inline double similarity(const std::set<std::string>& a,
                         const std::set<std::string>& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::vector<std::string> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(common));
  return static_cast<double>(common.size()) /
         static_cast<double>(std::max(a.size(), b.size()));
}

inline int words(const std::string& text) {
  static const std::regex word_re("\\S+");
  int count = 0;
  for (std::sregex_iterator it(text.begin(), text.end(), word_re), end;
       it != end; ++it)
    ++count;
  return count;
}

// Strict two-segment matcher, used as the format oracle.
inline bool strict_format(const std::string& raw) {
  static const std::regex shape_re(
      R"(^\s*<think>([\s\S]*?)</think>\s*<answer>([\s\S]*?)</answer>\s*$)");
  std::smatch m;
  if (!std::regex_match(raw, m, shape_re)) return false;
  for (int g = 1; g <= 2; ++g) {
    const std::string inner = m[g].str();
    for (const char* tag : {"<think>", "</think>", "<answer>", "</answer>"}) {
      if (inner.find(tag) != std::string::npos) return false;
    }
  }
  return true;
}

inline std::string first_group(const std::string& raw, const std::regex& re) {
  std::smatch m;
  if (std::regex_search(raw, m, re)) return m[1].str();
  return {};
}

inline std::string think_of(const std::string& raw) {
  static const std::regex re(R"(<think>([\s\S]*?)</think>)");
  return first_group(raw, re);
}

inline std::string answer_of(const std::string& raw) {
  static const std::regex re(R"(<answer>([\s\S]*?)</answer>)");
  return first_group(raw, re);
}

// Literal phrase -> boundary-guarded regex with flexible whitespace.
inline std::regex phrase_regex(const std::string& phrase) {
  std::string pattern;
  const std::string body = lower(phrase);
  for (char c : body) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      pattern.push_back(c);
    } else if (c == ' ') {
      pattern += "\\s+";
    } else {
      pattern.push_back('\\');
      pattern.push_back(c);
    }
  }
  std::string guarded;
  if (std::isalnum(static_cast<unsigned char>(body.front())))
    guarded += "(^|[^A-Za-z0-9])";
  guarded += "(" + pattern + ")";
  if (std::isalnum(static_cast<unsigned char>(body.back())))
    guarded += "($|[^A-Za-z0-9])";
  return std::regex(guarded, std::regex::icase);
}

struct Section {
  std::vector<std::regex> rules;

  double score(const std::string& think) const {
    double total = 0.0;
    for (const std::regex& re : rules)
      if (std::regex_search(think, re)) total += 1.0;
    return total;
  }
};

inline const Section& pattern_section() {
  static const Section s = [] {
    Section sec;
    for (const char* p :
         {"first", "second", "then", "next", "finally", "step 1",
          "rather than", "compared to", "in contrast to", "on the other hand",
          "considering the options", "evaluating each choice",
          "among the options", "most suitable", "the best fit",
          "fits the description best"})
      sec.rules.push_back(phrase_regex(p));
    sec.rules.push_back(std::regex(R"(\b1\.)"));
    sec.rules.push_back(std::regex(R"(\b2\.)"));
    return sec;
  }();
  return s;
}

inline const Section& logic_section() {
  static const Section s = [] {
    Section sec;
    for (const char* p :
         {"given", "based on", "since", "therefore", "thus", "hence", "so",
          "indicates", "suggests", "is consistent with", "as evidenced by",
          "assume", "suppose", "typically", "generally", "it is likely that"})
      sec.rules.push_back(phrase_regex(p));
    return sec;
  }();
  return s;
}

inline const Section& domain_section() {
  static const Section s = [] {
    Section sec;
    for (const char* p :
         {"sound", "audio", "noise", "pitch", "volume", "timbre", "rhythm",
          "frequency", "bell", "ring", "hooves", "engine", "siren", "animal",
          "clip-clop", "moo", "chord", "note", "melody", "harmony",
          "instrument", "major", "minor", "P5", "voice", "speech", "tone",
          "intonation", "male", "female", "shouting", "whisper"})
      sec.rules.push_back(phrase_regex(p));
    return sec;
  }();
  return s;
}

struct Breakdown {
  double acc = 0, format = 0, consistency = 0;
  double pattern = 0, logic = 0, domain = 0;
  double overthink = 0, total = 0;
};

inline int resolve(const std::string& answer, const tracelab::QAInstance& inst) {
  static const std::regex squeeze_re("\\s+");
  auto norm = [&](const std::string& s) {
    std::string collapsed = std::regex_replace(lower(s), squeeze_re, " ");
    const std::size_t begin = collapsed.find_first_not_of(' ');
    if (begin == std::string::npos) return std::string{};
    const std::size_t last = collapsed.find_last_not_of(' ');
    return collapsed.substr(begin, last - begin + 1);
  };
  const std::string n = norm(answer);
  if (n.size() == 1 && n[0] >= 'a' && n[0] <= 'd') return n[0] - 'a';
  for (int c = 0; c < 4; ++c)
    if (n == norm(inst.choices[c].text)) return c;
  return -1;
}

inline Breakdown score(const std::string& raw, const tracelab::QAInstance& inst,
                       double alpha_acc = 5.0, double alpha_format = 1.0,
                       double alpha_consistency = 1.0,
                       double alpha_keywords = 1.0,
                       double alpha_overthink = 1.0, int l_max = 256) {
  Breakdown b;
  const std::string think = think_of(raw);
  const std::string answer = answer_of(raw);

  b.acc = (!answer.empty() && resolve(answer, inst) == inst.gold_index) ? 1 : 0;
  b.format = strict_format(raw) ? 1 : 0;

  const auto think_set = concepts(think);
  std::string context = inst.question;
  for (const auto& c : inst.choices) context += " " + c.text;
  b.consistency = similarity(think_set, concepts(answer)) +
                  similarity(think_set, concepts(context));

  const std::string think_low = lower(think);
  b.pattern = pattern_section().score(think_low);
  b.logic = logic_section().score(think_low);
  b.domain = domain_section().score(think_low);

  b.overthink = 1.0 - static_cast<double>(words(think)) / l_max;
  b.total = alpha_acc * b.acc + alpha_format * b.format +
            alpha_consistency * b.consistency +
            alpha_keywords * (b.pattern + b.logic + b.domain) +
            alpha_overthink * b.overthink;
  return b;
}

}  // namespace refscore
