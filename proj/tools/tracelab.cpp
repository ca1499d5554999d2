// tracelab: process-reward scoring and desk-scale GRPO laboratory for
// tagged reasoning traces.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tracelab/grpo.hpp"
#include "tracelab/io.hpp"
#include "tracelab/judge.hpp"
#include "tracelab/policy.hpp"
#include "tracelab/rewards.hpp"
#include "tracelab/scaling.hpp"
#include "tracelab/synthetic.hpp"
#include "tracelab/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tracelab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;   // usage / config errors
constexpr int kExitData = 2;    // unreadable or inconsistent data
constexpr int kExitNumeric = 3; // non-finite training

constexpr const char* kConfigDirEnv = "TRACELAB_CONFIG_DIR";

// Resolves a config-ish path, falling back to $TRACELAB_CONFIG_DIR.
fs::path resolve_config_path(const std::string& path) {
  if (fs::exists(path)) return path;
  if (const char* dir = std::getenv(kConfigDirEnv)) {
    const fs::path candidate = fs::path(dir) / path;
    if (fs::exists(candidate)) return candidate;
  }
  return path;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

RewardWeights load_weights_or_default(const std::string& path) {
  if (path.empty()) return RewardWeights{};
  return io::load_weights(resolve_config_path(path));
}

KeywordTaxonomy load_taxonomy_or_default(const std::string& path) {
  if (path.empty()) return default_taxonomy();
  return io::load_taxonomy(resolve_config_path(path));
}

std::map<std::string, const QAInstance*> index_instances(
    const std::vector<QAInstance>& instances, const std::string& path) {
  std::map<std::string, const QAInstance*> by_id;
  for (const QAInstance& inst : instances) {
    if (!by_id.emplace(inst.id, &inst).second)
      throw io::data_error(path, 0, "duplicate instance id '" + inst.id + "'");
  }
  return by_id;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreArgs {
  std::string instances, traces, weights, taxonomy, out;
};

int cmd_score(const ScoreArgs& args) {
  Timer timer;
  const auto instances = io::read_instances(args.instances);
  const auto by_id = index_instances(instances, args.instances);
  const RewardWeights weights = load_weights_or_default(args.weights);
  const KeywordTaxonomy taxonomy = load_taxonomy_or_default(args.taxonomy);
  const RewardScorer scorer(weights, taxonomy);

  const auto traces = io::read_traces(args.traces);
  bool referential_failure = false;
  for (const io::TraceRecord& t : traces) {
    if (!by_id.count(t.instance_id)) {
      std::cerr << args.traces << ":" << t.line << ": unknown instance id '"
                << t.instance_id << "'\n";
      referential_failure = true;
    }
  }
  if (referential_failure) return kExitData;

  std::string out;
  for (const io::TraceRecord& t : traces) {
    out += io::breakdown_to_json(t.instance_id,
                                 scorer.score(t.raw, *by_id.at(t.instance_id)))
               .dump();
    out += '\n';
  }
  io::write_text_file_atomic(args.out, out);

  io::RunManifest manifest;
  manifest.command = "score";
  manifest.config = {{"weights", io::weights_to_json(weights)},
                     {"taxonomy_entries",
                      io::taxonomy_to_json(taxonomy)["pattern"].size() +
                          io::taxonomy_to_json(taxonomy)["logic"].size() +
                          io::taxonomy_to_json(taxonomy)["domain"].size()}};
  manifest.inputs = {{"instances", args.instances}, {"traces", args.traces}};
  manifest.outputs = {{"scores", fs::path(args.out).filename().string()}};
  manifest.duration_seconds = timer.seconds();
  io::write_manifest(io::manifest_path_for(args.out, false), manifest);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

struct AugmentArgs {
  std::string instances, templates, out;
};

TemplateSet load_templates(const std::string& path) {
  if (path.empty()) return TemplateSet::defaults();
  try {
    const json j = json::parse(io::read_text_file(resolve_config_path(path)));
    TemplateSet t;
    t.templates = j.at("templates").get<std::vector<std::string>>();
    t.validate();
    return t;
  } catch (const io::data_error&) {
    throw;
  } catch (const std::exception& e) {
    throw io::config_error(path + ": " + e.what());
  }
}

int cmd_augment(const AugmentArgs& args) {
  Timer timer;
  const auto instances = io::read_instances(args.instances);
  const TemplateSet templates = load_templates(args.templates);

  std::vector<QAInstance> expanded;
  expanded.reserve(instances.size() * (1 + templates.templates.size()));
  for (const QAInstance& inst : instances) {
    expanded.push_back(inst);
    for (QAInstance& variant : augment(inst, templates))
      expanded.push_back(std::move(variant));
  }
  io::write_instances(args.out, expanded);

  io::RunManifest manifest;
  manifest.command = "augment";
  manifest.config = {{"templates", templates.templates}};
  manifest.inputs = {{"instances", args.instances}};
  manifest.outputs = {{"instances", fs::path(args.out).filename().string()}};
  manifest.duration_seconds = timer.seconds();
  io::write_manifest(io::manifest_path_for(args.out, false), manifest);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, instances, policy, out;
  std::optional<std::uint64_t> seed;
};

json final_metrics(const ToyPolicy& policy, const std::vector<QAInstance>& dataset,
                   const TrainConfig& config, const KeywordTaxonomy& taxonomy) {
  const RewardScorer scorer(config.weights, taxonomy);
  rng::Stream stream = rng::derive_stream(config.seed, "train.final_eval");
  double acc = 0.0, consistency = 0.0, agreement = 0.0;
  for (const QAInstance& inst : dataset) {
    const SampleResult s = sample_response(policy, inst, config.max_think_len,
                                           config.noise, stream);
    const ParsedTrace trace = parse_trace(s.raw);
    const RewardBreakdown b = scorer.score(s.raw, inst);
    acc += b.acc;
    consistency += b.consistency;
    agreement += reasoning_answer_agreement(trace, inst);
  }
  const double n = static_cast<double>(dataset.size());
  return json{{"final_accuracy", acc / n},
              {"final_consistency", consistency / n},
              {"agreement_rate", agreement / n},
              {"n_eval", dataset.size()}};
}

int cmd_train(const TrainArgs& args) {
  Timer timer;
  const fs::path config_path = resolve_config_path(args.config);
  json config_json;
  try {
    config_json = json::parse(io::read_text_file(config_path));
  } catch (const io::data_error& e) {
    throw io::config_error(e.what());
  } catch (const std::exception& e) {
    throw io::config_error(config_path.string() + ": " + e.what());
  }
  TrainConfig config = io::train_config_from_json(config_json);
  if (args.seed) config.seed = *args.seed;

  std::string instance_path = args.instances;
  if (instance_path.empty())
    instance_path = config_json.value("instances", std::string{});
  if (instance_path.empty())
    throw io::config_error(
        "train: no instance file (set \"instances\" in the config or pass "
        "--instances)");

  const auto dataset = io::read_instances(instance_path);
  ToyPolicy initial = ToyPolicy::uniform();
  initial.answer_temperature = config.answer_temperature;
  if (!args.policy.empty())
    initial = io::load_policy(resolve_config_path(args.policy));
  const ToyPolicy reference = initial;
  const KeywordTaxonomy taxonomy = default_taxonomy();

  TrainResult result = train(dataset, initial, reference, config, taxonomy);

  const fs::path out_dir(args.out);
  fs::create_directories(out_dir);
  io::write_text_file_atomic(out_dir / "policy.json",
                             io::policy_to_json(result.policy).dump(2) + "\n");
  io::write_text_file_atomic(out_dir / "log.jsonl",
                             io::train_log_to_jsonl(result.log));
  io::write_text_file_atomic(out_dir / "summary.csv",
                             io::train_log_to_csv(result.log));
  io::write_text_file_atomic(
      out_dir / "final_metrics.json",
      final_metrics(result.policy, dataset, config, taxonomy).dump(2) + "\n");

  io::RunManifest manifest;
  manifest.command = "train";
  manifest.config = io::train_config_to_json(config);
  manifest.config["instances"] = instance_path;
  manifest.seed = config.seed;
  manifest.inputs = {{"config", config_path.string()},
                     {"instances", instance_path}};
  if (!args.policy.empty()) manifest.inputs["initial_policy"] = args.policy;
  manifest.outputs = {{"policy", "policy.json"},
                      {"log", "log.jsonl"},
                      {"summary_csv", "summary.csv"},
                      {"final_metrics", "final_metrics.json"}};
  manifest.duration_seconds = timer.seconds();
  io::write_manifest(io::manifest_path_for(out_dir, true), manifest);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string policy, eval, budgets, out;
  std::uint64_t seed = 0;
  double noise_p0 = 0.0;
  double noise_growth = 0.0;
};

int cmd_sweep(const SweepArgs& args) {
  Timer timer;
  const ToyPolicy policy = io::load_policy(resolve_config_path(args.policy));
  const auto eval_set = io::read_instances(args.eval);
  std::vector<int> budgets;
  try {
    budgets = parse_budget_range(args.budgets);
  } catch (const std::exception& e) {
    throw io::config_error(e.what());
  }
  NoiseModel noise{args.noise_p0, args.noise_growth};
  noise.validate();

  const ScalingCurve curve = sweep(policy, eval_set, budgets, noise, args.seed);
  io::write_text_file_atomic(args.out, emit_curve(curve));

  io::RunManifest manifest;
  manifest.command = "sweep";
  manifest.config = {{"budgets", args.budgets},
                     {"noise",
                      {{"base_corruption", noise.base_corruption},
                       {"growth", noise.growth}}}};
  manifest.seed = args.seed;
  manifest.inputs = {{"policy", args.policy}, {"eval", args.eval}};
  manifest.outputs = {{"curve", fs::path(args.out).filename().string()}};
  manifest.duration_seconds = timer.seconds();
  io::write_manifest(io::manifest_path_for(args.out, false), manifest);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// judge
// ---------------------------------------------------------------------------

struct JudgeArgs {
  std::string instances, a, b, weights, taxonomy, out;
  bool mock = false;
  double epsilon = 1e-9;
};

int cmd_judge(const JudgeArgs& args) {
  Timer timer;
  if (!args.mock)
    throw io::config_error(
        "judge: only the deterministic mock judge ships in-tree; pass --mock");
  const auto instances = io::read_instances(args.instances);
  const auto by_id = index_instances(instances, args.instances);
  const RewardWeights weights = load_weights_or_default(args.weights);
  const KeywordTaxonomy taxonomy = load_taxonomy_or_default(args.taxonomy);

  const auto traces_a = io::read_traces(args.a);
  const auto traces_b = io::read_traces(args.b);
  std::map<std::string, std::string> b_by_id;
  for (const io::TraceRecord& t : traces_b) {
    if (!b_by_id.emplace(t.instance_id, t.raw).second)
      throw io::data_error(args.b, t.line,
                           "duplicate instance id '" + t.instance_id + "'");
  }

  std::vector<ComparisonRecord> records;
  records.reserve(traces_a.size());
  for (const io::TraceRecord& t : traces_a) {
    if (!by_id.count(t.instance_id))
      throw io::data_error(args.a, t.line,
                           "unknown instance id '" + t.instance_id + "'");
    auto b_it = b_by_id.find(t.instance_id);
    if (b_it == b_by_id.end())
      throw io::data_error(args.a, t.line,
                           "no model-B trace for instance '" + t.instance_id +
                               "'");
    ComparisonRecord rec;
    rec.instance_id = t.instance_id;
    rec.trace_a = t.raw;
    rec.trace_b = b_it->second;
    rec.judge_id = "mock";
    rec.verdict = mock_judge(*by_id.at(t.instance_id), rec.trace_a, rec.trace_b,
                             weights, taxonomy, args.epsilon);
    records.push_back(std::move(rec));
  }
  if (records.empty())
    throw io::data_error(args.a, 0, "no comparison records to judge");

  const WinRateReport report = aggregate_win_rate(records);

  const fs::path out_dir(args.out);
  fs::create_directories(out_dir);
  std::string verdict_lines;
  for (const ComparisonRecord& rec : records) {
    verdict_lines += json{{"instance_id", rec.instance_id},
                          {"verdict", std::string(verdict_name(rec.verdict))},
                          {"judge", rec.judge_id}}
                         .dump();
    verdict_lines += '\n';
  }
  io::write_text_file_atomic(out_dir / "verdicts.jsonl", verdict_lines);
  io::write_text_file_atomic(out_dir / "judge_summary.json",
                             io::win_rate_to_json(report).dump(2) + "\n");

  io::RunManifest manifest;
  manifest.command = "judge";
  manifest.config = {{"mock", true},
                     {"epsilon", args.epsilon},
                     {"weights", io::weights_to_json(weights)}};
  manifest.inputs = {{"instances", args.instances},
                     {"a", args.a},
                     {"b", args.b}};
  manifest.outputs = {{"verdicts", "verdicts.jsonl"},
                      {"summary", "judge_summary.json"}};
  manifest.duration_seconds = timer.seconds();
  io::write_manifest(io::manifest_path_for(out_dir, true), manifest);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fs::path find_manifest(const fs::path& dir) {
  if (fs::exists(dir / io::kManifestFilename)) return dir / io::kManifestFilename;
  std::vector<fs::path> candidates;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.size() > 14 &&
          name.substr(name.size() - 14) == ".manifest.json")
        candidates.push_back(entry.path());
    }
  }
  std::sort(candidates.begin(), candidates.end());
  if (candidates.empty())
    throw io::data_error((dir / io::kManifestFilename).string(), 0,
                         "no run manifest found");
  return candidates.front();
}

int cmd_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const io::RunManifest manifest = io::read_manifest(find_manifest(dir));

  char buf[128];
  std::cout << "command: " << manifest.command << "\n";
  std::cout << "version: " << manifest.version << "\n";
  std::cout << "seed: " << manifest.seed << "\n";

  auto resolve = [&](const std::string& name) -> std::optional<fs::path> {
    auto it = manifest.outputs.find(name);
    if (it == manifest.outputs.end()) return std::nullopt;
    const fs::path direct(it->second);
    if (fs::exists(direct)) return direct;
    const fs::path in_dir = dir / fs::path(it->second).filename();
    if (fs::exists(in_dir)) return in_dir;
    return std::nullopt;
  };

  if (auto csv = resolve("summary_csv")) {
    std::ifstream in(*csv);
    std::string line, last;
    std::getline(in, line);  // header
    while (std::getline(in, line))
      if (!line.empty()) last = line;
    if (!last.empty()) {
      int iter = 0, rest = 0;
      double reward = 0, acc = 0, cons = 0, len = 0, kl = 0, loss = 0;
      if (std::sscanf(last.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%lf%n", &iter,
                      &reward, &acc, &cons, &len, &kl, &loss, &rest) >= 7) {
        std::snprintf(buf, sizeof(buf), "final accuracy: %.6f", acc);
        std::cout << buf << "\n";
        std::snprintf(buf, sizeof(buf), "final consistency: %.6f", cons);
        std::cout << buf << "\n";
        std::snprintf(buf, sizeof(buf), "final mean reward: %.6f", reward);
        std::cout << buf << "\n";
      }
    }
  }
  if (auto metrics = resolve("final_metrics")) {
    const json j = json::parse(io::read_text_file(*metrics));
    std::snprintf(buf, sizeof(buf), "agreement rate: %.6f",
                  j.at("agreement_rate").get<double>());
    std::cout << buf << "\n";
  }
  if (auto curve_path = resolve("curve")) {
    const ScalingCurve curve =
        parse_curve(io::read_text_file(*curve_path));
    if (!curve.points.empty())
      std::cout << "sweet spot (L_sweet): " << sweet_spot(curve) << "\n";
  }
  if (auto summary = resolve("summary")) {
    const json j = json::parse(io::read_text_file(*summary));
    std::snprintf(buf, sizeof(buf), "win rate A: %.6f",
                  j.at("a_rate").get<double>());
    std::cout << buf << "\n";
    std::snprintf(buf, sizeof(buf), "win rate B: %.6f",
                  j.at("b_rate").get<double>());
    std::cout << buf << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Process-reward scoring and desk-scale GRPO laboratory for tagged "
      "reasoning traces"};
  app.set_version_flag("--version", std::string(io::kToolVersion));
  app.require_subcommand(1);

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand(
      "score", "Score trace files with the multi-faceted reward suite");
  score->add_option("--instances", score_args.instances, "Instance file (JSONL)")
      ->required();
  score->add_option("--traces", score_args.traces, "Trace file (JSONL)")
      ->required();
  score->add_option("--weights", score_args.weights, "Reward weights (JSON)");
  score->add_option("--taxonomy", score_args.taxonomy, "Keyword taxonomy (JSON)");
  score->add_option("--out", score_args.out, "Output breakdown file (JSONL)")
      ->required();

  AugmentArgs augment_args;
  CLI::App* augment_cmd = app.add_subcommand(
      "augment", "Expand an instance file with answer-invariant rephrasings");
  augment_cmd
      ->add_option("--instances", augment_args.instances, "Instance file (JSONL)")
      ->required();
  augment_cmd->add_option("--templates", augment_args.templates,
                          "Template file (JSON)");
  augment_cmd->add_option("--out", augment_args.out, "Output instance file")
      ->required();

  TrainArgs train_args;
  std::uint64_t train_seed = 0;
  CLI::App* train_cmd = app.add_subcommand(
      "train", "Run group-relative policy optimization on a synthetic task");
  train_cmd->add_option("--config", train_args.config, "Train config (JSON)")
      ->required();
  train_cmd->add_option("--instances", train_args.instances,
                        "Instance file override");
  train_cmd->add_option("--policy", train_args.policy,
                        "Initial policy file (default: uniform)");
  CLI::Option* seed_opt =
      train_cmd->add_option("--seed", train_seed, "Seed override");
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();

  SweepArgs sweep_args;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "Test-time scaling sweep over think budgets");
  sweep_cmd->add_option("--policy", sweep_args.policy, "Policy file (JSON)")
      ->required();
  sweep_cmd->add_option("--eval", sweep_args.eval, "Evaluation instances (JSONL)")
      ->required();
  sweep_cmd
      ->add_option("--budgets", sweep_args.budgets,
                   "Inclusive budget range start:end:step")
      ->required();
  sweep_cmd->add_option("--seed", sweep_args.seed, "Random seed");
  sweep_cmd->add_option("--noise-p0", sweep_args.noise_p0,
                        "Base corruption probability");
  sweep_cmd->add_option("--noise-growth", sweep_args.noise_growth,
                        "Per-position corruption growth");
  sweep_cmd->add_option("--out", sweep_args.out, "Output curve (CSV)")
      ->required();

  JudgeArgs judge_args;
  CLI::App* judge_cmd = app.add_subcommand(
      "judge", "Pairwise reasoning comparison with tie-splitting win rates");
  judge_cmd
      ->add_option("--instances", judge_args.instances, "Instance file (JSONL)")
      ->required();
  judge_cmd->add_option("--a", judge_args.a, "Model A trace file")->required();
  judge_cmd->add_option("--b", judge_args.b, "Model B trace file")->required();
  judge_cmd->add_flag("--mock", judge_args.mock,
                      "Use the deterministic reward-based mock judge");
  judge_cmd->add_option("--epsilon", judge_args.epsilon,
                        "Tie threshold on the total-reward delta");
  judge_cmd->add_option("--weights", judge_args.weights, "Reward weights (JSON)");
  judge_cmd->add_option("--taxonomy", judge_args.taxonomy,
                        "Keyword taxonomy (JSON)");
  judge_cmd->add_option("--out", judge_args.out, "Output directory")->required();

  std::string report_dir;
  CLI::App* report_cmd =
      app.add_subcommand("report", "Summarize a finished run directory");
  report_cmd->add_option("--run", report_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (score->parsed()) return cmd_score(score_args);
    if (augment_cmd->parsed()) return cmd_augment(augment_args);
    if (train_cmd->parsed()) {
      if (!seed_opt->empty()) train_args.seed = train_seed;
      return cmd_train(train_args);
    }
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
    if (judge_cmd->parsed()) return cmd_judge(judge_args);
    if (report_cmd->parsed()) return cmd_report(report_dir);
  } catch (const train_divergence_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const io::data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const io::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
