#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracelab/policy.hpp"
#include "tracelab/rewards.hpp"
#include "tracelab/rng.hpp"
#include "tracelab/synthetic.hpp"

namespace tracelab {

// ============================================================================
// Configuration
// ============================================================================

/**
 * Training hyperparameters. Defaults follow the reference setup:
 * K = 8 samples per example, learning rate 1e-5, batch size 32. The KL
 * coefficient has no published value; 0.04 is this artifact's default
 * and is deliberately surfaced in the config document.
 */
struct TrainConfig {
  int group_size = 8;  // K
  double learning_rate = 1e-5;
  int batch_size = 32;
  double kl_beta = 0.04;
  int iterations = 0;
  std::uint64_t seed = 0;
  RewardWeights weights;
  int max_think_len = 64;
  NoiseModel noise;
  double answer_temperature = 1.0;

  void validate() const {
    if (group_size < 2)
      throw std::invalid_argument(
          "TrainConfig: group_size must be >= 2 (mean-baseline advantages "
          "are undefined for singleton groups)");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1)
      throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(kl_beta >= 0.0) || !std::isfinite(kl_beta))
      throw std::invalid_argument("TrainConfig: kl_beta must be >= 0");
    if (iterations < 0)
      throw std::invalid_argument("TrainConfig: iterations must be >= 0");
    if (max_think_len < 0)
      throw std::invalid_argument("TrainConfig: max_think_len must be >= 0");
    if (!(answer_temperature > 0.0))
      throw std::invalid_argument("TrainConfig: answer_temperature must be > 0");
    weights.validate();
    noise.validate();
  }
};

// ============================================================================
// Rollout groups and advantages
// ============================================================================

struct RolloutGroup {
  std::string instance_id;
  std::vector<SampleResult> samples;
  std::vector<RewardBreakdown> breakdowns;
  std::vector<double> advantages;
  std::vector<double> logprobs;       // under the current policy
  std::vector<double> kl_estimates;   // log pi(s) - log pi_ref(s) per sample
};

/// K independent samples with exact decision log-probabilities.
inline std::vector<SampleResult> sample_group(const ToyPolicy& policy,
                                              const QAInstance& instance,
                                              int k, int max_think_len,
                                              const NoiseModel& noise,
                                              rng::Stream& stream) {
  if (k < 2) throw std::invalid_argument("sample_group: K must be >= 2");
  std::vector<SampleResult> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i)
    out.push_back(sample_response(policy, instance, max_think_len, noise, stream));
  return out;
}

/// Mean-baseline advantages: totals minus the group mean.
inline std::vector<double> compute_advantages(const std::vector<double>& totals) {
  if (totals.size() < 2)
    throw std::invalid_argument(
        "compute_advantages: need at least 2 samples per group");
  const double mean =
      std::accumulate(totals.begin(), totals.end(), 0.0) /
      static_cast<double>(totals.size());
  std::vector<double> adv(totals.size());
  for (std::size_t i = 0; i < totals.size(); ++i) adv[i] = totals[i] - mean;
  return adv;
}

/**
 * Policy-gradient loss for one group: -(1/K) * sum_k A_k * log pi(s_k).
 * Advantages are constants; only the log-probabilities carry gradient.
 */
inline double policy_gradient_loss(const RolloutGroup& group) {
  if (group.advantages.size() != group.logprobs.size() ||
      group.advantages.empty())
    throw std::invalid_argument("policy_gradient_loss: malformed group");
  double acc = 0.0;
  for (std::size_t k = 0; k < group.advantages.size(); ++k)
    acc += group.advantages[k] * group.logprobs[k];
  return -acc / static_cast<double>(group.advantages.size());
}

/// Adds the analytic gradient of policy_gradient_loss to grad.
inline void accumulate_policy_gradient(const ToyPolicy& policy,
                                       const QAInstance& instance,
                                       const RolloutGroup& group,
                                       GradVec& grad) {
  const double k = static_cast<double>(group.samples.size());
  for (std::size_t i = 0; i < group.samples.size(); ++i) {
    const SampleResult& s = group.samples[i];
    accumulate_logprob_grad(policy, instance, s.path, s.think_words,
                            -group.advantages[i] / k, grad);
  }
}

// ============================================================================
// KL regularization
// ============================================================================

/// KL(p || q) between two categorical logit vectors.
inline double kl_categorical(const std::vector<double>& p_logits,
                             const std::vector<double>& q_logits) {
  if (p_logits.size() != q_logits.size())
    throw std::invalid_argument("kl_categorical: mismatched supports");
  const std::vector<double> lp = log_softmax(p_logits);
  const std::vector<double> lq = log_softmax(q_logits);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i)
    kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  return kl;
}

/**
 * Exact per-instance KL between the factorized heads of two policies:
 * length head + emission head + answer head, the latter evaluated at
 * the empty-think context of the given instance (closed form; no
 * sampling estimator).
 */
inline double kl_term(const ToyPolicy& policy, const ToyPolicy& reference,
                      const QAInstance& instance) {
  policy.validate();
  reference.validate();
  if (policy.length_logits.size() != reference.length_logits.size() ||
      policy.emission_logits.size() != reference.emission_logits.size() ||
      policy.answer_bias.size() != reference.answer_bias.size())
    throw std::invalid_argument("kl_term: mismatched policy supports");
  static const std::vector<std::string> kNoThink{};
  return kl_categorical(policy.length_logits, reference.length_logits) +
         kl_categorical(policy.emission_logits, reference.emission_logits) +
         kl_categorical(answer_scores(policy, instance, kNoThink),
                        answer_scores(reference, instance, kNoThink));
}

namespace detail {

// d KL(softmax(x) || q) / dx_i = p_i * (log p_i - log q_i - KL).
inline void kl_head_grad(const std::vector<double>& p_logits,
                         const std::vector<double>& q_logits, double coeff,
                         double* grad_out) {
  const std::vector<double> lp = log_softmax(p_logits);
  const std::vector<double> lq = log_softmax(q_logits);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i)
    kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  for (std::size_t i = 0; i < lp.size(); ++i)
    grad_out[i] += coeff * std::exp(lp[i]) * (lp[i] - lq[i] - kl);
}

}  // namespace detail

/// Adds coeff * d kl_term / d(params) to grad (reference held fixed).
inline void accumulate_kl_grad(const ToyPolicy& policy,
                               const ToyPolicy& reference,
                               const QAInstance& instance, double coeff,
                               GradVec& grad) {
  static const std::vector<std::string> kNoThink{};
  detail::kl_head_grad(policy.length_logits, reference.length_logits, coeff,
                       grad.data());
  detail::kl_head_grad(policy.emission_logits, reference.emission_logits,
                       coeff, grad.data() + kLengthBuckets.size());
  // Answer head: scores are bias plus a theta-independent overlap term,
  // so d(scores)/d(bias) is the identity.
  detail::kl_head_grad(answer_scores(policy, instance, kNoThink),
                       answer_scores(reference, instance, kNoThink), coeff,
                       grad.data() + kLengthBuckets.size() + kNumEmissionCategories);
}

// ============================================================================
// Training loop
// ============================================================================

struct TrainRecord {
  int iteration = 0;
  double mean_reward = 0.0;
  double mean_accuracy = 0.0;
  double mean_consistency = 0.0;
  double mean_think_len = 0.0;
  double kl = 0.0;
  double loss = 0.0;
};

using TrainLog = std::vector<TrainRecord>;

struct TrainResult {
  ToyPolicy policy;
  TrainLog log;
};

/// Raised when the loss or a gradient goes non-finite; carries the
/// iteration where training blew up.
class train_divergence_error : public std::runtime_error {
 public:
  train_divergence_error(int iteration, const std::string& what)
      : std::runtime_error("training diverged at iteration " +
                           std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}

  int iteration() const { return iteration_; }

 private:
  int iteration_ = 0;
};

/// Test/diagnostic hook invoked once per rollout group.
using GroupObserver = std::function<void(int iteration, const RolloutGroup&)>;

/**
 * Group-relative policy optimization over a synthetic dataset.
 *
 * Per iteration: draw a mini-batch (epoch-shuffled, partial final
 * batches keep their actual size), sample K responses per example,
 * score them with the multi-faceted reward, subtract the group mean to
 * get advantages, and take one SGD step on the batch-averaged
 * policy-gradient-plus-KL loss. Deterministic for a fixed config.
 */
inline TrainResult train(const std::vector<QAInstance>& dataset,
                         const ToyPolicy& initial_policy,
                         const ToyPolicy& reference_policy,
                         const TrainConfig& config,
                         const KeywordTaxonomy& taxonomy = default_taxonomy(),
                         const GroupObserver& observer = nullptr) {
  config.validate();
  initial_policy.validate();
  reference_policy.validate();
  if (dataset.empty())
    throw std::invalid_argument("train: dataset must be non-empty");

  const RewardScorer scorer(config.weights, taxonomy);
  ToyPolicy policy = initial_policy;
  TrainLog log;
  log.reserve(config.iterations);

  rng::Stream batch_stream = rng::derive_stream(config.seed, "grpo.batch");
  rng::Stream sample_stream = rng::derive_stream(config.seed, "grpo.sample");

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = n;  // forces a shuffle before the first batch

  const double k = static_cast<double>(config.group_size);

  for (int iter = 0; iter < config.iterations; ++iter) {
    // Epoch-shuffled mini-batch; the final batch of an epoch may be short.
    if (cursor >= n) {
      for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[batch_stream.uniform_index(i)]);
      cursor = 0;
    }
    const std::size_t batch_end =
        std::min(n, cursor + static_cast<std::size_t>(config.batch_size));
    const std::size_t batch_actual = batch_end - cursor;

    GradVec grad = zero_grad();
    double loss_sum = 0.0;
    double kl_sum = 0.0;
    double reward_sum = 0.0, acc_sum = 0.0, cons_sum = 0.0, len_sum = 0.0;

    for (std::size_t b = cursor; b < batch_end; ++b) {
      const QAInstance& instance = dataset[order[b]];

      RolloutGroup group;
      group.instance_id = instance.id;
      group.samples = sample_group(policy, instance, config.group_size,
                                   config.max_think_len, config.noise,
                                   sample_stream);
      std::vector<double> totals(group.samples.size());
      for (std::size_t i = 0; i < group.samples.size(); ++i) {
        group.breakdowns.push_back(scorer.score(group.samples[i].raw, instance));
        totals[i] = group.breakdowns.back().total;
        group.logprobs.push_back(group.samples[i].logprob);
      }
      group.advantages = compute_advantages(totals);
      {
        const EmissionPools pools(instance);
        for (const SampleResult& s : group.samples)
          group.kl_estimates.push_back(
              s.logprob - path_logprob(reference_policy, instance, pools,
                                       s.path, s.think_words));
      }

      const double pg_loss = policy_gradient_loss(group);
      const double kl = kl_term(policy, reference_policy, instance);
      loss_sum += pg_loss + config.kl_beta * kl;
      kl_sum += kl;

      accumulate_policy_gradient(policy, instance, group, grad);
      accumulate_kl_grad(policy, reference_policy, instance, config.kl_beta,
                         grad);

      for (std::size_t i = 0; i < group.samples.size(); ++i) {
        const RewardBreakdown& brk = group.breakdowns[i];
        reward_sum += brk.total;
        acc_sum += brk.acc;
        cons_sum += brk.consistency;
        len_sum += static_cast<double>(group.samples[i].think_words.size());
      }

      if (observer) observer(iter, group);
    }
    cursor = batch_end;

    const double batch_div = static_cast<double>(batch_actual);
    const double loss = loss_sum / batch_div;
    if (!std::isfinite(loss))
      throw train_divergence_error(iter, "non-finite loss");
    for (double& g : grad) {
      g /= batch_div;
      if (!std::isfinite(g))
        throw train_divergence_error(iter, "non-finite gradient");
    }

    // Single exclusive SGD step.
    std::vector<double> params = policy.params();
    for (std::size_t i = 0; i < params.size(); ++i)
      params[i] -= config.learning_rate * grad[i];
    policy.set_params(params);
    policy.validate();

    TrainRecord rec;
    rec.iteration = iter;
    const double samples = batch_div * k;
    rec.mean_reward = reward_sum / samples;
    rec.mean_accuracy = acc_sum / samples;
    rec.mean_consistency = cons_sum / samples;
    rec.mean_think_len = len_sum / samples;
    rec.kl = kl_sum / batch_div;
    rec.loss = loss;
    log.push_back(rec);
  }

  return TrainResult{std::move(policy), std::move(log)};
}

}  // namespace tracelab
