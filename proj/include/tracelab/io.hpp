#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracelab/grpo.hpp"
#include "tracelab/judge.hpp"
#include "tracelab/policy.hpp"
#include "tracelab/rewards.hpp"
#include "tracelab/scaling.hpp"
#include "tracelab/trace.hpp"

namespace tracelab::io {

using nlohmann::json;

/// Bad input data (malformed record, unknown reference). Carries the
/// offending line when known. CLI exit code 2.
class data_error : public std::runtime_error {
 public:
  data_error(const std::string& path, long line, const std::string& what)
      : std::runtime_error(path + (line > 0 ? ":" + std::to_string(line) : "") +
                           ": " + what),
        line_(line) {}

  long line() const { return line_; }

 private:
  long line_ = 0;
};

/// Bad configuration (unparseable document, invalid field). CLI exit
/// code 1.
class config_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ============================================================================
// Plain file helpers
// ============================================================================

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error(path.string(), 0, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Writes via a temporary name and renames into place, so readers never
/// observe a partial file.
inline void write_text_file_atomic(const std::filesystem::path& path,
                                   const std::string& content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error(tmp.string(), 0, "cannot open file for writing");
    out << content;
    out.flush();
    if (!out) throw data_error(tmp.string(), 0, "write failed");
  }
  std::filesystem::rename(tmp, path);
}

// ============================================================================
// Instance and trace record files (UTF-8 JSON lines)
// ============================================================================

inline json instance_to_json(const QAInstance& inst) {
  json choices = json::array();
  for (const Choice& c : inst.choices)
    choices.push_back({{"text", c.text}, {"concepts", c.concepts}});
  return json{{"id", inst.id},
              {"caption", inst.caption},
              {"question", inst.question},
              {"choices", choices},
              {"gold_index", inst.gold_index}};
}

inline QAInstance instance_from_json(const json& j) {
  QAInstance inst;
  inst.id = j.at("id").get<std::string>();
  inst.caption = j.at("caption").get<std::vector<std::string>>();
  inst.question = j.at("question").get<std::string>();
  for (const json& cj : j.at("choices")) {
    Choice c;
    c.text = cj.at("text").get<std::string>();
    c.concepts = cj.at("concepts").get<std::vector<std::string>>();
    inst.choices.push_back(std::move(c));
  }
  inst.gold_index = j.at("gold_index").get<int>();
  inst.validate();
  return inst;
}

inline std::vector<QAInstance> read_instances(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error(path.string(), 0, "cannot open instance file");
  std::vector<QAInstance> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(instance_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw data_error(path.string(), line_no,
                       std::string("bad instance record: ") + e.what());
    }
  }
  return out;
}

inline void write_instances(const std::filesystem::path& path,
                            const std::vector<QAInstance>& instances) {
  std::string out;
  for (const QAInstance& inst : instances) {
    out += instance_to_json(inst).dump();
    out += '\n';
  }
  write_text_file_atomic(path, out);
}

struct TraceRecord {
  std::string instance_id;
  std::string raw;
  long line = 0;  // source line, for data-error reporting
};

inline std::vector<TraceRecord> read_traces(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error(path.string(), 0, "cannot open trace file");
  std::vector<TraceRecord> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back(TraceRecord{j.at("instance_id").get<std::string>(),
                                j.at("raw").get<std::string>(), line_no});
    } catch (const std::exception& e) {
      throw data_error(path.string(), line_no,
                       std::string("bad trace record: ") + e.what());
    }
  }
  return out;
}

inline void write_traces(const std::filesystem::path& path,
                         const std::vector<TraceRecord>& traces) {
  std::string out;
  for (const TraceRecord& t : traces) {
    out += json{{"instance_id", t.instance_id}, {"raw", t.raw}}.dump();
    out += '\n';
  }
  write_text_file_atomic(path, out);
}

// ============================================================================
// Reward weights and keyword taxonomy documents
// ============================================================================

inline json weights_to_json(const RewardWeights& w) {
  return json{{"alpha_acc", w.alpha_acc},
              {"alpha_format", w.alpha_format},
              {"alpha_consistency", w.alpha_consistency},
              {"alpha_keywords", w.alpha_keywords},
              {"alpha_overthink", w.alpha_overthink},
              {"l_max_output", w.l_max_output}};
}

inline RewardWeights weights_from_json(const json& j) {
  RewardWeights w;
  try {
    w.alpha_acc = j.value("alpha_acc", w.alpha_acc);
    w.alpha_format = j.value("alpha_format", w.alpha_format);
    w.alpha_consistency = j.value("alpha_consistency", w.alpha_consistency);
    w.alpha_keywords = j.value("alpha_keywords", w.alpha_keywords);
    w.alpha_overthink = j.value("alpha_overthink", w.alpha_overthink);
    w.l_max_output = j.value("l_max_output", w.l_max_output);
    w.validate();
  } catch (const std::exception& e) {
    throw config_error(std::string("weights: ") + e.what());
  }
  return w;
}

inline RewardWeights load_weights(const std::filesystem::path& path) {
  try {
    return weights_from_json(json::parse(read_text_file(path)));
  } catch (const config_error&) {
    throw;
  } catch (const std::exception& e) {
    throw config_error(path.string() + ": " + e.what());
  }
}

inline json taxonomy_to_json(const KeywordTaxonomy& t) {
  auto section = [](const std::vector<KeywordRule>& rules) {
    json arr = json::array();
    for (const KeywordRule& r : rules)
      arr.push_back(
          {{"id", r.id},
           {"kind", r.kind == RuleKind::Literal ? "literal" : "regex"},
           {"expression", r.expression},
           {"category", r.category},
           {"weight", r.weight}});
    return arr;
  };
  return json{{"pattern", section(t.pattern_entries)},
              {"logic", section(t.logic_entries)},
              {"domain", section(t.domain_entries)}};
}

inline KeywordTaxonomy taxonomy_from_json(const json& j) {
  auto section = [](const json& arr) {
    std::vector<KeywordRule> rules;
    for (const json& rj : arr) {
      KeywordRule r;
      r.id = rj.at("id").get<std::string>();
      const std::string kind = rj.at("kind").get<std::string>();
      if (kind == "literal") {
        r.kind = RuleKind::Literal;
      } else if (kind == "regex") {
        r.kind = RuleKind::Regex;
      } else {
        throw config_error("taxonomy: unknown rule kind '" + kind + "'");
      }
      r.expression = rj.at("expression").get<std::string>();
      r.category = rj.value("category", std::string{});
      r.weight = rj.value("weight", 1.0);
      rules.push_back(std::move(r));
    }
    return rules;
  };
  KeywordTaxonomy t;
  try {
    t.pattern_entries = section(j.at("pattern"));
    t.logic_entries = section(j.at("logic"));
    t.domain_entries = section(j.at("domain"));
    t.validate();
  } catch (const config_error&) {
    throw;
  } catch (const std::exception& e) {
    throw config_error(std::string("taxonomy: ") + e.what());
  }
  return t;
}

inline KeywordTaxonomy load_taxonomy(const std::filesystem::path& path) {
  try {
    return taxonomy_from_json(json::parse(read_text_file(path)));
  } catch (const config_error&) {
    throw;
  } catch (const std::exception& e) {
    throw config_error(path.string() + ": " + e.what());
  }
}

// ============================================================================
// Policy and training config documents
// ============================================================================

inline json policy_to_json(const ToyPolicy& p) {
  return json{{"length_logits", p.length_logits},
              {"emission_logits", p.emission_logits},
              {"answer_temperature", p.answer_temperature},
              {"answer_bias", p.answer_bias}};
}

inline ToyPolicy policy_from_json(const json& j) {
  ToyPolicy p;
  try {
    p.length_logits = j.at("length_logits").get<std::vector<double>>();
    p.emission_logits = j.at("emission_logits").get<std::vector<double>>();
    p.answer_temperature = j.at("answer_temperature").get<double>();
    p.answer_bias = j.at("answer_bias").get<std::vector<double>>();
    p.validate();
  } catch (const std::exception& e) {
    throw config_error(std::string("policy: ") + e.what());
  }
  return p;
}

inline ToyPolicy load_policy(const std::filesystem::path& path) {
  try {
    return policy_from_json(json::parse(read_text_file(path)));
  } catch (const config_error&) {
    throw;
  } catch (const std::exception& e) {
    throw config_error(path.string() + ": " + e.what());
  }
}

inline json train_config_to_json(const TrainConfig& c) {
  return json{{"group_size", c.group_size},
              {"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"kl_beta", c.kl_beta},
              {"iterations", c.iterations},
              {"seed", c.seed},
              {"max_think_len", c.max_think_len},
              {"answer_temperature", c.answer_temperature},
              {"weights", weights_to_json(c.weights)},
              {"noise",
               {{"base_corruption", c.noise.base_corruption},
                {"growth", c.noise.growth}}}};
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  try {
    c.group_size = j.value("group_size", c.group_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.kl_beta = j.value("kl_beta", c.kl_beta);
    c.iterations = j.value("iterations", c.iterations);
    c.seed = j.value("seed", c.seed);
    c.max_think_len = j.value("max_think_len", c.max_think_len);
    c.answer_temperature = j.value("answer_temperature", c.answer_temperature);
    if (j.contains("weights")) c.weights = weights_from_json(j.at("weights"));
    if (j.contains("noise")) {
      c.noise.base_corruption =
          j.at("noise").value("base_corruption", c.noise.base_corruption);
      c.noise.growth = j.at("noise").value("growth", c.noise.growth);
    }
    c.validate();
  } catch (const config_error&) {
    throw;
  } catch (const std::exception& e) {
    throw config_error(std::string("train config: ") + e.what());
  }
  return c;
}

// ============================================================================
// Score records, training logs, judge reports
// ============================================================================

inline json breakdown_to_json(const std::string& instance_id,
                              const RewardBreakdown& b) {
  return json{{"instance_id", instance_id},
              {"acc", b.acc},
              {"format", b.format},
              {"consistency", b.consistency},
              {"pattern", b.pattern},
              {"logic", b.logic},
              {"domain", b.domain},
              {"overthink", b.overthink},
              {"total", b.total}};
}

inline std::string train_log_to_jsonl(const TrainLog& log) {
  std::string out;
  for (const TrainRecord& r : log) {
    out += json{{"iteration", r.iteration},
                {"mean_reward", r.mean_reward},
                {"mean_accuracy", r.mean_accuracy},
                {"mean_consistency", r.mean_consistency},
                {"mean_think_len", r.mean_think_len},
                {"kl", r.kl},
                {"loss", r.loss}}
               .dump();
    out += '\n';
  }
  return out;
}

inline std::string train_log_to_csv(const TrainLog& log) {
  std::string out = "iteration,mean_reward,accuracy,consistency,mean_think_len,kl,loss\n";
  char row[256];
  for (const TrainRecord& r : log) {
    std::snprintf(row, sizeof(row), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  r.iteration, r.mean_reward, r.mean_accuracy,
                  r.mean_consistency, r.mean_think_len, r.kl, r.loss);
    out += row;
  }
  return out;
}

inline json win_rate_to_json(const WinRateReport& r) {
  return json{{"a_wins", r.a_wins}, {"b_wins", r.b_wins}, {"ties", r.ties},
              {"total", r.total},   {"a_num", r.a_num},   {"b_num", r.b_num},
              {"den", r.den},       {"a_rate", r.a_rate}, {"b_rate", r.b_rate}};
}

// ============================================================================
// Run manifest
// ============================================================================

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kManifestFilename = "manifest.json";

/**
 * Provenance record written beside every command's outputs: the command,
 * its fully resolved config, seed, input/output paths, tool version,
 * and wall-clock duration.
 */
struct RunManifest {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::string version = std::string(kToolVersion);
  double duration_seconds = 0.0;
};

inline json manifest_to_json(const RunManifest& m) {
  return json{{"command", m.command},   {"config", m.config},
              {"seed", m.seed},         {"inputs", m.inputs},
              {"outputs", m.outputs},   {"version", m.version},
              {"duration_seconds", m.duration_seconds}};
}

inline RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config");
  m.seed = j.at("seed").get<std::uint64_t>();
  m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  m.version = j.at("version").get<std::string>();
  m.duration_seconds = j.at("duration_seconds").get<double>();
  return m;
}

/// Manifest path for a command whose primary output is `out`: inside
/// `out` when it is a directory, else beside the output file.
inline std::filesystem::path manifest_path_for(
    const std::filesystem::path& out, bool out_is_directory) {
  if (out_is_directory) return out / kManifestFilename;
  std::filesystem::path p = out;
  p += ".manifest.json";
  return p;
}

inline void write_manifest(const std::filesystem::path& path,
                           const RunManifest& m) {
  write_text_file_atomic(path, manifest_to_json(m).dump(2) + "\n");
}

inline RunManifest read_manifest(const std::filesystem::path& path) {
  try {
    return manifest_from_json(json::parse(read_text_file(path)));
  } catch (const data_error&) {
    throw;
  } catch (const std::exception& e) {
    throw data_error(path.string(), 0,
                     std::string("bad manifest: ") + e.what());
  }
}

}  // namespace tracelab::io
