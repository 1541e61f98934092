#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aistk/ais/types.hpp"
#include "aistk/vrnn/model.hpp"

namespace aistk::vrnn {

struct StepScore {
  int slot = 0;
  std::int64_t timestamp = 0;
  bool observed = false;
  double logp = 0.0;  // NaN for missing slots
};

struct ScoreConfig {
  int n_samples = 50;
  std::uint64_t seed = 7;
};

/// Per-step predictive log-likelihood log p(x_t | x_{<t}) by sequential Monte
/// Carlo with the filtering posterior as proposal. Observed steps weight each
/// particle by emission * prior / proposal, score with logsumexp over the
/// running normalized weights, and resample systematically when the effective
/// sample size drops below n/2. Missing slots advance every particle through
/// the prior with a sampled emission and carry no score.
std::vector<StepScore> stepwise_loglik(const VrnnModel& m, const GridTrack& track,
                                       const ScoreConfig& cfg);

/// Importance-sampled marginal log-likelihood of a dense track: n_samples
/// independent posterior rollouts, no resampling. If mc_sigma is non-null it
/// receives a delta-method standard error of the log estimate.
double is_loglik(const VrnnModel& m, std::span<const FourHotVector> xs,
                 int n_samples, std::uint64_t seed, double* mc_sigma = nullptr);

/// Deterministic per-step regime vectors [h_t, z_t]: z is the posterior mean
/// at observed slots and the prior mean at missing ones. Missing observations
/// are filled with the per-block argmax of the emission before the recurrence
/// advances.
struct Regime {
  std::vector<double> h, z;
};
std::vector<Regime> regimes(const VrnnModel& m, const GridTrack& track);

/// Ancestor indices for systematic resampling: positions u0 + k/n walked
/// through the cumulative weights. w_norm must sum to 1; u0 is in [0, 1/n).
std::vector<int> systematic_resample(std::span<const double> w_norm, double u0);

double logsumexp(std::span<const double> v);

/// 1 / sum(w^2) for normalized weights.
double effective_sample_size(std::span<const double> w_norm);

/// Per-block argmax of emission logits, lowest index on ties.
FourHotVector argmax_blocks(std::span<const double> logits, const BlockLayout& l);

/// Per-block categorical sample from sigmoid(logits).
FourHotVector sample_blocks(std::span<const double> logits, const BlockLayout& l,
                            Rng& rng);

}  // namespace aistk::vrnn
