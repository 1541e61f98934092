#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aistk/ais/types.hpp"
#include "aistk/fourhot.hpp"
#include "aistk/nn/layers.hpp"
#include "aistk/rng.hpp"
#include "aistk/tensor.hpp"

namespace aistk::vrnn {

using nn::LstmState;

struct VrnnConfig {
  RoiConfig roi;
  int hidden_dim = 32;
  int latent_dim = 32;
  double sigma_floor = 1e-3;
};

/// Variational recurrent model over four-hot message vectors.
///
/// Per step t with recurrent state h_t:
///   prior      p(z_t | h_t)        diagonal Gaussian
///   posterior  q(z_t | x_t, h_t)   diagonal Gaussian
///   emission   p(x_t | z_t, h_t)   independent Bernoulli per bin
///   recurrence h_{t+1} = LSTM([phi_x(x_t), phi_z(z_t)], h_t)
/// Standard deviations are softplus(head output) + sigma_floor.
struct VrnnModel {
  VrnnConfig cfg;

  nn::Dense phi_x;        // bins -> H, relu
  nn::Dense phi_z;        // Z -> H, relu
  nn::Dense prior_hidden; // H -> H, relu
  nn::Dense prior_mu;     // H -> Z
  nn::Dense prior_sigma;  // H -> Z, softplus
  nn::Dense post_hidden;  // 2H -> H, relu, input [phi_x, h]
  nn::Dense post_mu;      // H -> Z
  nn::Dense post_sigma;   // H -> Z, softplus
  nn::Dense emis_hidden;  // 2H -> H, relu, input [phi_z, h]
  nn::Dense emis_logits;  // H -> bins

  nn::LstmCell lstm;      // input 2H = [phi_x, phi_z], hidden H

  static VrnnModel create(const VrnnConfig& cfg, Rng& rng);

  int bins() const { return layout_.total; }
  int hidden() const { return cfg.hidden_dim; }
  int latent() const { return cfg.latent_dim; }
  const BlockLayout& layout() const { return layout_; }

  /// Parameter tensors in fixed order; this order defines the checkpoint
  /// layout and the optimizer slot assignment.
  std::vector<std::pair<std::string, Tensor*>> params();
  std::vector<std::pair<std::string, const Tensor*>> params() const;
  std::int64_t param_count() const;

  /// Rounds every parameter to the nearest binary32 value, in place.
  void quantize_f32();

  LstmState initial_state() const;

  void rebuild_layout() { layout_ = BlockLayout(cfg.roi); }

 private:
  BlockLayout layout_;
};

/// Gradient buffers mirroring VrnnModel::params() order.
struct VrnnGrads {
  nn::Dense::Grads phi_x, phi_z, prior_hidden, prior_mu, prior_sigma,
      post_hidden, post_mu, post_sigma, emis_hidden, emis_logits;
  nn::LstmCell::Grads lstm;

  explicit VrnnGrads(const VrnnModel& m);
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  void zero();
  void add(const VrnnGrads& other);
  void scale(double s);
  bool all_finite() const;
};

// -- distribution helpers ----------------------------------------------------

/// KL( N(mu_q, diag sigma_q^2) || N(mu_p, diag sigma_p^2) ), closed form.
double kl_gauss_diag(std::span<const double> mu_q, std::span<const double> sigma_q,
                     std::span<const double> mu_p, std::span<const double> sigma_p);

/// Accumulates scale * dKL/d(...) into the four gradient buffers.
void kl_gauss_diag_backward(std::span<const double> mu_q,
                            std::span<const double> sigma_q,
                            std::span<const double> mu_p,
                            std::span<const double> sigma_p, double scale,
                            std::span<double> d_mu_q, std::span<double> d_sigma_q,
                            std::span<double> d_mu_p, std::span<double> d_sigma_p);

/// log p(x | logits) for independent Bernoulli bins with a four-hot x:
/// sum over set bits of logit minus sum over all bins of softplus(logit).
double bernoulli_fourhot_logprob(const FourHotVector& x, const BlockLayout& layout,
                                 std::span<const double> logits);

/// Accumulates scale * dlogprob/dlogits = scale * (x - sigmoid(logits)).
void bernoulli_fourhot_logprob_backward(const FourHotVector& x,
                                        const BlockLayout& layout,
                                        std::span<const double> logits,
                                        double scale, std::span<double> d_logits);

/// log N(z; mu, diag sigma^2).
double gauss_diag_logpdf(std::span<const double> z, std::span<const double> mu,
                         std::span<const double> sigma);

// -- single-step forward / backward -----------------------------------------

/// Distribution parameters and sampled values produced by one step.
struct StepValues {
  std::vector<double> prior_mu, prior_sigma;
  std::vector<double> post_mu, post_sigma;
  std::vector<double> z;       // mu_q + sigma_q * eps
  std::vector<double> logits;  // emission logits given (z, h)
};

/// Everything backward needs from one forward step.
struct StepCache {
  nn::DenseCache phi_x_c, phi_z_c;
  nn::DenseCache prior_hidden_c, prior_mu_c, prior_sigma_c;
  nn::DenseCache post_hidden_c, post_mu_c, post_sigma_c;
  nn::DenseCache emis_hidden_c, emis_logits_c;
  nn::LstmCache lstm_c;
  FourHotVector x;
  std::vector<double> eps;
  StepValues vals;
};

/// Runs one observed step: computes prior and posterior, samples
/// z = mu_q + sigma_q * eps, evaluates emission logits, advances the
/// recurrence. `eps` must have latent_dim entries. Pass cache to keep the
/// intermediates needed by vrnn_step_backward.
void vrnn_forward_step(const VrnnModel& m, const LstmState& state,
                       const FourHotVector& x, std::span<const double> eps,
                       StepValues& out, LstmState& next, StepCache* cache);

/// Per-track forward + backward of the negative ELBO.
/// Accumulates scale * d(-ELBO)/dparams into g and returns the track ELBO
/// (sum over steps of recon_t - kl_t). `noise` holds T*latent_dim values.
double vrnn_backprop_track(const VrnnModel& m,
                           std::span<const FourHotVector> xs,
                           std::span<const double> noise, double scale,
                           VrnnGrads& g);

/// Per-step ELBO terms for one track with the given noise (T*latent_dim).
struct ElboReport {
  std::vector<double> recon;  // log p(x_t | z_t, h_t)
  std::vector<double> kl;     // KL(q || p) at step t
  double total = 0.0;         // sum(recon - kl)
  double per_step() const { return recon.empty() ? 0.0 : total / double(recon.size()); }
};

ElboReport vrnn_elbo(const VrnnModel& m, std::span<const FourHotVector> xs,
                     std::span<const double> noise);

// -- stateless evaluation pieces (scoring, generation) -----------------------

/// Scratch buffers reused across scoring steps.
struct VrnnWorkspace {
  std::vector<double> phi_x_out, phi_z_out, hidden, concat;
  nn::LstmCache lstm_c;
};

void prior_params(const VrnnModel& m, std::span<const double> h,
                  std::vector<double>& mu, std::vector<double>& sigma,
                  VrnnWorkspace& ws);

/// Posterior q(z | x, h); also leaves phi_x(x) in ws.phi_x_out.
void posterior_params(const VrnnModel& m, std::span<const double> h,
                      const FourHotVector& x, std::vector<double>& mu,
                      std::vector<double>& sigma, VrnnWorkspace& ws);

/// Emission logits for (z, h); also leaves phi_z(z) in ws.phi_z_out.
void emission_logits_for(const VrnnModel& m, std::span<const double> h,
                         std::span<const double> z, std::vector<double>& logits,
                         VrnnWorkspace& ws);

/// Advances the recurrence with the phi outputs already in the workspace.
LstmState advance_state(const VrnnModel& m, const LstmState& state,
                        std::span<const double> phi_x_out,
                        std::span<const double> phi_z_out, VrnnWorkspace& ws);

/// phi_x for an explicit four-hot observation, into ws.phi_x_out.
void phi_x_of(const VrnnModel& m, const FourHotVector& x, VrnnWorkspace& ws);

}  // namespace aistk::vrnn
