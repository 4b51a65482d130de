#pragma once

/**
 * Token-weighted GRPO on tabular softmax toy policies.
 *
 * Implements the clipped surrogate with a separate advantage coefficient for
 * exploration tokens, group-standardized advantages, the KL-regularized
 * objective, analytic gradients (checked against finite differences in the
 * tests), and the quantified-property estimators: gradient-emphasis ratio,
 * confidence margin / entropy trends under an ascent step, and the
 * plan-advantage sign statistic.
 */

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "e2c/error.hpp"
#include "e2c/rng.hpp"

namespace e2c::rlmath {

struct GrpoConfig {
  double epsilon = 0.2;     // clip ratio
  double beta = 0.001;      // KL coefficient (stage 2: 0)
  double lambda_exp = 2.0;  // exploration advantage coefficient; lambda_exe = 1
};

struct StageConfig {
  int stage = 1;
  double temperature = 1.3;
  int rollouts = 32;

  static StageConfig stage1() { return {1, 1.3, 32}; }
  static StageConfig stage2() { return {2, 1.0, 8}; }
};

enum class Segment { Exploration, Execution };

struct RolloutToken {
  int state = 0;
  int action = 0;
  Segment segment = Segment::Execution;
  double logp_old = 0.0;  // behavior-policy log-prob at sampling time
};

struct Rollout {
  std::vector<RolloutToken> tokens;
  double reward = 0.0;  // sequence-level, broadcast to every token
};

struct RolloutGroup {
  std::vector<Rollout> rollouts;
};

// Tabular softmax policy over a finite state/action space.
struct ToyPolicy {
  int num_states = 1;
  int num_actions = 2;
  std::vector<double> logits;  // row-major [state][action]
  double temperature = 1.0;

  static ToyPolicy make(int states, int actions, double temperature = 1.0) {
    ToyPolicy p;
    p.num_states = states;
    p.num_actions = actions;
    p.temperature = temperature;
    p.logits.assign(static_cast<std::size_t>(states) * actions, 0.0);
    return p;
  }

  double& logit(int s, int a) { return logits[static_cast<std::size_t>(s) * num_actions + a]; }
  double logit(int s, int a) const { return logits[static_cast<std::size_t>(s) * num_actions + a]; }

  std::vector<double> probs(int s) const {
    std::vector<double> p(num_actions);
    double mx = -1e300;
    for (int a = 0; a < num_actions; ++a)
      mx = std::max(mx, logit(s, a) / temperature);
    double z = 0.0;
    for (int a = 0; a < num_actions; ++a) {
      p[a] = std::exp(logit(s, a) / temperature - mx);
      z += p[a];
    }
    for (double& x : p) x /= z;
    return p;
  }

  double log_prob(int s, int a) const {
    double mx = -1e300;
    for (int b = 0; b < num_actions; ++b)
      mx = std::max(mx, logit(s, b) / temperature);
    double z = 0.0;
    for (int b = 0; b < num_actions; ++b)
      z += std::exp(logit(s, b) / temperature - mx);
    return logit(s, a) / temperature - mx - std::log(z);
  }

  int sample_action(int s, Rng& rng) const {
    auto p = probs(s);
    double r = rng.next_double();
    double acc = 0.0;
    for (int a = 0; a < num_actions; ++a) {
      acc += p[a];
      if (r < acc) return a;
    }
    return num_actions - 1;
  }
};

struct AdvantageTensor {
  std::vector<double> per_rollout;  // broadcast to all tokens of the rollout
  double group_mean = 0.0;
  double group_std = 0.0;  // population std
};

// Group standardization: (r_i - mean) / population std; all zeros when the
// group is reward-degenerate.
inline AdvantageTensor normalize_advantages(const RolloutGroup& group) {
  const std::size_t g = group.rollouts.size();
  if (g < 2) fail("GroupTooSmall", "need at least 2 rollouts per group");

  AdvantageTensor adv;
  double mean = 0.0;
  for (const auto& r : group.rollouts) mean += r.reward;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (const auto& r : group.rollouts) {
    double d = r.reward - mean;
    var += d * d;
  }
  var /= static_cast<double>(g);
  double sd = std::sqrt(var);

  adv.group_mean = mean;
  adv.group_std = sd;
  adv.per_rollout.reserve(g);
  for (const auto& r : group.rollouts) {
    adv.per_rollout.push_back(sd < 1e-12 ? 0.0 : (r.reward - mean) / sd);
  }
  return adv;
}

inline double lambda_for(const RolloutToken& tok, const GrpoConfig& cfg) {
  return tok.segment == Segment::Exploration ? cfg.lambda_exp : 1.0;
}

// (1/G) sum_{i,t} min(rho * lambda * A, clip(rho, 1-eps, 1+eps) * lambda * A)
inline double clipped_objective(const ToyPolicy& policy, const RolloutGroup& group,
                                const AdvantageTensor& adv, const GrpoConfig& cfg) {
  const std::size_t g = group.rollouts.size();
  double total = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    double a_hat = adv.per_rollout[i];
    for (const auto& tok : group.rollouts[i].tokens) {
      double ratio = std::exp(policy.log_prob(tok.state, tok.action) - tok.logp_old);
      if (!std::isfinite(ratio)) fail("NonFiniteRatio", "importance ratio overflow");
      double clipped = std::min(std::max(ratio, 1.0 - cfg.epsilon), 1.0 + cfg.epsilon);
      double lam = lambda_for(tok, cfg);
      total += std::min(ratio * lam * a_hat, clipped * lam * a_hat);
    }
  }
  return total / static_cast<double>(g);
}

// Exact categorical KL(policy || ref) at one state.
inline double kl_at_state(const ToyPolicy& policy, const ToyPolicy& ref, int s) {
  auto p = policy.probs(s);
  auto q = ref.probs(s);
  double kl = 0.0;
  for (int a = 0; a < policy.num_actions; ++a) {
    if (p[a] > 0) kl += p[a] * (std::log(p[a]) - std::log(q[a]));
  }
  return kl;
}

inline std::set<int> visited_states(const RolloutGroup& group) {
  std::set<int> states;
  for (const auto& r : group.rollouts)
    for (const auto& tok : r.tokens) states.insert(tok.state);
  return states;
}

// J = L_clip - beta * sum_{visited s} KL(pi_theta(.|s) || pi_ref(.|s))
inline double grpo_objective(const ToyPolicy& policy, const RolloutGroup& group,
                             const AdvantageTensor& adv, const GrpoConfig& cfg,
                             const ToyPolicy& ref) {
  if (ref.num_states != policy.num_states || ref.num_actions != policy.num_actions)
    fail("SupportMismatch", "reference policy has a different support");
  double obj = clipped_objective(policy, group, adv, cfg);
  if (cfg.beta != 0.0) {
    for (int s : visited_states(group)) obj -= cfg.beta * kl_at_state(policy, ref, s);
  }
  return obj;
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

// d log pi(a|s) / d theta[s,b] = (1[b==a] - p(b|s)) / tau, zero off-row.
// The per-token contribution to L_clip (without the 1/G factor) is
// min(rho lam A, clip(rho) lam A); its exact theta-gradient is
// lam * A * rho * grad_log_pi on the unclipped branch and zero when the clip
// is saturated.
inline std::vector<double> token_gradient(const ToyPolicy& policy,
                                          const RolloutToken& tok, double a_hat,
                                          const GrpoConfig& cfg) {
  std::vector<double> grad(policy.logits.size(), 0.0);
  if (a_hat == 0.0) return grad;
  double ratio = std::exp(policy.log_prob(tok.state, tok.action) - tok.logp_old);
  if (!std::isfinite(ratio)) fail("NonFiniteRatio", "importance ratio overflow");

  bool saturated = (a_hat > 0 && ratio > 1.0 + cfg.epsilon) ||
                   (a_hat < 0 && ratio < 1.0 - cfg.epsilon);
  if (saturated) return grad;

  double lam = lambda_for(tok, cfg);
  auto p = policy.probs(tok.state);
  double scale = lam * a_hat * ratio / policy.temperature;
  std::size_t row = static_cast<std::size_t>(tok.state) * policy.num_actions;
  for (int b = 0; b < policy.num_actions; ++b) {
    double indicator = b == tok.action ? 1.0 : 0.0;
    grad[row + b] = scale * (indicator - p[b]);
  }
  return grad;
}

// Gradient of L_clip (with the 1/G factor).
inline std::vector<double> group_gradient(const ToyPolicy& policy,
                                          const RolloutGroup& group,
                                          const AdvantageTensor& adv,
                                          const GrpoConfig& cfg) {
  std::vector<double> grad(policy.logits.size(), 0.0);
  const double inv_g = 1.0 / static_cast<double>(group.rollouts.size());
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    for (const auto& tok : group.rollouts[i].tokens) {
      auto g = token_gradient(policy, tok, adv.per_rollout[i], cfg);
      for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += inv_g * g[j];
    }
  }
  return grad;
}

// Gradient of J = L_clip - beta * KL, exact for the tabular softmax.
inline std::vector<double> grpo_gradient(const ToyPolicy& policy,
                                         const RolloutGroup& group,
                                         const AdvantageTensor& adv,
                                         const GrpoConfig& cfg,
                                         const ToyPolicy& ref) {
  auto grad = group_gradient(policy, group, adv, cfg);
  if (cfg.beta != 0.0) {
    for (int s : visited_states(group)) {
      auto p = policy.probs(s);
      auto q = ref.probs(s);
      double kl = kl_at_state(policy, ref, s);
      std::size_t row = static_cast<std::size_t>(s) * policy.num_actions;
      for (int b = 0; b < policy.num_actions; ++b) {
        double dkl = p[b] / policy.temperature *
                     ((std::log(p[b]) - std::log(q[b])) - kl);
        grad[row + b] -= cfg.beta * dkl;
      }
    }
  }
  return grad;
}

// Smallest distance of any importance ratio to a clip boundary. Tests use
// this to stay away from the non-differentiable kinks.
inline double min_kink_distance(const ToyPolicy& policy, const RolloutGroup& group,
                                const GrpoConfig& cfg) {
  double best = 1e300;
  for (const auto& r : group.rollouts) {
    for (const auto& tok : r.tokens) {
      double ratio = std::exp(policy.log_prob(tok.state, tok.action) - tok.logp_old);
      best = std::min(best, std::abs(ratio - (1.0 - cfg.epsilon)));
      best = std::min(best, std::abs(ratio - (1.0 + cfg.epsilon)));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Quantified properties
// ---------------------------------------------------------------------------

// Controlled construction for the emphasis ratio: every sample contributes an
// exploration token and an execution token with identical (state, action,
// advantage) and logp_old equal to the current log-prob, so the two segments
// have matched score-function statistics by construction.
inline RolloutGroup make_matched_group(const ToyPolicy& policy, int n_samples,
                                       std::uint64_t seed) {
  Rng rng(seed);
  RolloutGroup group;
  for (int i = 0; i < n_samples; ++i) {
    int s = static_cast<int>(rng.next_below(policy.num_states));
    int a = policy.sample_action(s, rng);
    double logp = policy.log_prob(s, a);
    Rollout r;
    r.tokens.push_back({s, a, Segment::Exploration, logp});
    r.tokens.push_back({s, a, Segment::Execution, logp});
    r.reward = rng.next_below(2) == 0 ? 1.0 : 0.0;
    group.rollouts.push_back(std::move(r));
  }
  return group;
}

// E[||g||^2 | exploration] / E[||g||^2 | execution] using the per-token
// policy-gradient contributions.
inline double grad_emphasis_ratio(const ToyPolicy& policy, const RolloutGroup& group,
                                  const AdvantageTensor& adv, const GrpoConfig& cfg) {
  double sum_exp = 0.0, sum_exe = 0.0;
  std::size_t n_exp = 0, n_exe = 0;
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    for (const auto& tok : group.rollouts[i].tokens) {
      auto g = token_gradient(policy, tok, adv.per_rollout[i], cfg);
      double norm_sq = 0.0;
      for (double x : g) norm_sq += x * x;
      if (tok.segment == Segment::Exploration) {
        sum_exp += norm_sq;
        ++n_exp;
      } else {
        sum_exe += norm_sq;
        ++n_exe;
      }
    }
  }
  if (n_exp < 100 || n_exe < 100)
    fail("InsufficientSamples", "need >= 100 tokens per segment");
  return (sum_exp / static_cast<double>(n_exp)) /
         (sum_exe / static_cast<double>(n_exe));
}

inline double confidence_margin(const ToyPolicy& policy, int s) {
  auto p = policy.probs(s);
  double top = -1.0, second = -1.0;
  for (double x : p) {
    if (x > top) {
      second = top;
      top = x;
    } else if (x > second) {
      second = x;
    }
  }
  return top - second;
}

inline double entropy(const ToyPolicy& policy, int s) {
  auto p = policy.probs(s);
  double h = 0.0;
  for (double x : p)
    if (x > 0) h -= x * std::log(x);
  return h;
}

struct PolicyMetrics {
  double mean_margin = 0.0;
  double mean_entropy = 0.0;
};

inline PolicyMetrics metrics_over_states(const ToyPolicy& policy,
                                         const std::set<int>& states) {
  PolicyMetrics m;
  for (int s : states) {
    m.mean_margin += confidence_margin(policy, s);
    m.mean_entropy += entropy(policy, s);
  }
  if (!states.empty()) {
    m.mean_margin /= static_cast<double>(states.size());
    m.mean_entropy /= static_cast<double>(states.size());
  }
  return m;
}

struct StageStepResult {
  PolicyMetrics before;
  PolicyMetrics after;
  ToyPolicy updated;
};

// One ascent step on J; metrics are reported over the states visited by
// execution tokens.
inline StageStepResult simulate_stage2_step(const ToyPolicy& policy,
                                            const RolloutGroup& group,
                                            const GrpoConfig& cfg,
                                            double step_size) {
  auto adv = normalize_advantages(group);
  auto grad = grpo_gradient(policy, group, adv, cfg, policy);

  std::set<int> exe_states;
  for (const auto& r : group.rollouts)
    for (const auto& tok : r.tokens)
      if (tok.segment == Segment::Execution) exe_states.insert(tok.state);

  StageStepResult result;
  result.before = metrics_over_states(policy, exe_states);
  result.updated = policy;
  for (std::size_t j = 0; j < grad.size(); ++j)
    result.updated.logits[j] += step_size * grad[j];
  result.after = metrics_over_states(result.updated, exe_states);
  return result;
}

// Controlled construction for the plan-sign statistic: each rollout carries
// exploration tokens sampled from the policy; the caller supplies the shared
// plan-level advantage per rollout via the AdvantageTensor.
inline RolloutGroup make_plan_sign_group(const ToyPolicy& policy, int n_rollouts,
                                         int tokens_per_rollout,
                                         std::uint64_t seed) {
  Rng rng(seed);
  RolloutGroup group;
  for (int i = 0; i < n_rollouts; ++i) {
    Rollout r;
    for (int t = 0; t < tokens_per_rollout; ++t) {
      int s = static_cast<int>(rng.next_below(policy.num_states));
      int a = policy.sample_action(s, rng);
      r.tokens.push_back({s, a, Segment::Exploration, policy.log_prob(s, a)});
    }
    group.rollouts.push_back(std::move(r));
  }
  return group;
}

// Empirical mean sign of the exploration-token update component along the
// sampled-action logit direction.
inline double plan_sign_estimate(const ToyPolicy& policy, const RolloutGroup& group,
                                 const AdvantageTensor& adv, const GrpoConfig& cfg) {
  double sum_sign = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    for (const auto& tok : group.rollouts[i].tokens) {
      if (tok.segment != Segment::Exploration) continue;
      auto g = token_gradient(policy, tok, adv.per_rollout[i], cfg);
      double component =
          g[static_cast<std::size_t>(tok.state) * policy.num_actions + tok.action];
      sum_sign += component > 0 ? 1.0 : (component < 0 ? -1.0 : 0.0);
      ++n;
    }
  }
  if (n < 100) fail("InsufficientSamples", "need >= 100 exploration tokens");
  return sum_sign / static_cast<double>(n);
}

}  // namespace e2c::rlmath
