#pragma once

#include <cstdint>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracelab/policy.hpp"
#include "tracelab/rewards.hpp"
#include "tracelab/rng.hpp"

namespace tracelab {

// ============================================================================
// Test-time scaling curves
// ============================================================================

struct ScalingPoint {
  int budget = 0;               // max think length L
  double mean_emitted_len = 0.0;
  double accuracy = 0.0;        // correct / n_eval
  int n_eval = 0;
};

struct ScalingCurve {
  std::vector<ScalingPoint> points;
};

inline void validate_budgets(const std::vector<int>& budgets) {
  if (budgets.empty())
    throw std::invalid_argument("sweep: budgets must be non-empty");
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (budgets[i] < 0)
      throw std::invalid_argument("sweep: budgets must be >= 0");
    if (i > 0 && budgets[i] <= budgets[i - 1])
      throw std::invalid_argument("sweep: budgets must be strictly increasing");
  }
}

/// Parses an inclusive "start:end:step" budget range flag.
inline std::vector<int> parse_budget_range(const std::string& spec) {
  int start = 0, end = 0, step = 0;
  char extra = '\0';
  if (std::sscanf(spec.c_str(), "%d:%d:%d%c", &start, &end, &step, &extra) != 3)
    throw std::invalid_argument("budget range must be start:end:step, got '" +
                                spec + "'");
  if (step <= 0) throw std::invalid_argument("budget range step must be > 0");
  if (start < 0 || end < start)
    throw std::invalid_argument("budget range must satisfy 0 <= start <= end");
  std::vector<int> budgets;
  for (int b = start; b <= end; b += step) budgets.push_back(b);
  return budgets;
}

/**
 * Test-time scaling sweep: one sampled response per instance per
 * budget, accuracy measured with the accuracy reward, realized think
 * lengths averaged. Budget points use independent derived rng streams,
 * so the curve is deterministic for a fixed seed and may be evaluated
 * point-parallel later without changing results.
 */
inline ScalingCurve sweep(const ToyPolicy& policy,
                          const std::vector<QAInstance>& eval_set,
                          const std::vector<int>& budgets,
                          const NoiseModel& noise, std::uint64_t seed) {
  validate_budgets(budgets);
  if (eval_set.empty())
    throw std::invalid_argument("sweep: eval_set must be non-empty");

  ScalingCurve curve;
  curve.points.reserve(budgets.size());
  for (int budget : budgets) {
    rng::Stream stream =
        rng::derive_stream(seed, "sweep.budget." + std::to_string(budget));
    long correct = 0;
    double len_sum = 0.0;
    for (const QAInstance& instance : eval_set) {
      const SampleResult s =
          sample_response(policy, instance, budget, noise, stream);
      correct += accuracy_reward(parse_trace(s.raw), instance);
      len_sum += static_cast<double>(s.think_words.size());
    }
    ScalingPoint p;
    p.budget = budget;
    p.n_eval = static_cast<int>(eval_set.size());
    p.accuracy = static_cast<double>(correct) / static_cast<double>(p.n_eval);
    p.mean_emitted_len = len_sum / static_cast<double>(p.n_eval);
    curve.points.push_back(p);
  }
  return curve;
}

/// Budget of the maximum-accuracy point; ties go to the smallest
/// budget (the cheapest equally good reasoning).
inline int sweet_spot(const ScalingCurve& curve) {
  if (curve.points.empty())
    throw std::invalid_argument("sweet_spot: empty curve");
  const ScalingPoint* best = &curve.points.front();
  for (const ScalingPoint& p : curve.points)
    if (p.accuracy > best->accuracy) best = &p;
  return best->budget;
}

// ============================================================================
// CSV round trip
// ============================================================================

inline std::string emit_curve(const ScalingCurve& curve) {
  std::string out = "budget,mean_emitted_len,accuracy,n_eval\n";
  char row[160];
  for (const ScalingPoint& p : curve.points) {
    std::snprintf(row, sizeof(row), "%d,%.6f,%.6f,%d\n", p.budget,
                  p.mean_emitted_len, p.accuracy, p.n_eval);
    out += row;
  }
  return out;
}

inline ScalingCurve parse_curve(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) ||
      line != "budget,mean_emitted_len,accuracy,n_eval")
    throw std::invalid_argument("parse_curve: bad header");
  ScalingCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ScalingPoint p;
    char extra = '\0';
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%d%c", &p.budget,
                    &p.mean_emitted_len, &p.accuracy, &p.n_eval, &extra) != 4)
      throw std::invalid_argument("parse_curve: bad row '" + line + "'");
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace tracelab
