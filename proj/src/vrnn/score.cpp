#include "aistk/vrnn/score.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aistk/errors.hpp"
#include "aistk/fourhot.hpp"

namespace aistk::vrnn {

double logsumexp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

double effective_sample_size(std::span<const double> w_norm) {
  double s2 = 0.0;
  for (double w : w_norm) s2 += w * w;
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

std::vector<int> systematic_resample(std::span<const double> w_norm, double u0) {
  const int n = int(w_norm.size());
  if (n == 0) throw NumericError("systematic_resample: empty weights");
  std::vector<int> out(size_t(n), 0);
  double cum = w_norm[0];
  int j = 0;
  for (int k = 0; k < n; ++k) {
    double u = u0 + double(k) / double(n);
    while (cum < u && j < n - 1) {
      ++j;
      cum += w_norm[size_t(j)];
    }
    out[size_t(k)] = j;
  }
  return out;
}

FourHotVector argmax_blocks(std::span<const double> logits, const BlockLayout& l) {
  auto block_argmax = [&](int off, int bins) {
    int best = 0;
    double best_v = logits[size_t(off)];
    for (int i = 1; i < bins; ++i)
      if (logits[size_t(off + i)] > best_v) {
        best_v = logits[size_t(off + i)];
        best = i;
      }
    return best;
  };
  FourHotVector v;
  v.lat_bin = block_argmax(l.lat_off, l.lat_bins);
  v.lon_bin = block_argmax(l.lon_off, l.lon_bins);
  v.sog_bin = block_argmax(l.sog_off, l.sog_bins);
  v.cog_bin = block_argmax(l.cog_off, l.cog_bins);
  return v;
}

FourHotVector sample_blocks(std::span<const double> logits, const BlockLayout& l,
                            Rng& rng) {
  std::vector<double> probs;
  auto draw = [&](int off, int bins) {
    probs.resize(size_t(bins));
    for (int i = 0; i < bins; ++i)
      probs[size_t(i)] =
          nn::apply_activation(nn::Activation::sigmoid, logits[size_t(off + i)]);
    return sample_block(probs, rng);
  };
  FourHotVector v;
  v.lat_bin = draw(l.lat_off, l.lat_bins);
  v.lon_bin = draw(l.lon_off, l.lon_bins);
  v.sog_bin = draw(l.sog_off, l.sog_bins);
  v.cog_bin = draw(l.cog_off, l.cog_bins);
  return v;
}

std::vector<StepScore> stepwise_loglik(const VrnnModel& m, const GridTrack& track,
                                       const ScoreConfig& cfg) {
  if (cfg.n_samples <= 0) throw ConfigError("stepwise_loglik: n_samples must be positive");
  const int n = cfg.n_samples;
  const int Z = m.latent();
  const int T = int(track.slots.size());
  const auto& roi = m.cfg.roi;
  const BlockLayout& layout = m.layout();
  Rng rng(derive_seed(cfg.seed, track.id));

  std::vector<nn::LstmState> states(size_t(n), m.initial_state());
  std::vector<nn::LstmState> reordered(size_t(n), nn::LstmState{});
  std::vector<double> logW(size_t(n), -std::log(double(n)));
  std::vector<double> logw(size_t(n), 0.0), w_lin(size_t(n), 0.0);
  std::vector<double> mu_p, sig_p, mu_q, sig_q, logits;
  std::vector<double> z(size_t(Z), 0.0);
  VrnnWorkspace ws;

  std::vector<StepScore> rows;
  rows.reserve(size_t(T));
  for (int t = 0; t < T; ++t) {
    if (track.observed(t)) {
      const FourHotVector x = encode(*track.slots[size_t(t)], roi);
      for (int j = 0; j < n; ++j) {
        nn::LstmState& st = states[size_t(j)];
        prior_params(m, st.h, mu_p, sig_p, ws);
        posterior_params(m, st.h, x, mu_q, sig_q, ws);
        for (int i = 0; i < Z; ++i)
          z[size_t(i)] = mu_q[size_t(i)] + sig_q[size_t(i)] * rng.normal();
        emission_logits_for(m, st.h, z, logits, ws);
        logw[size_t(j)] = bernoulli_fourhot_logprob(x, layout, logits) +
                          gauss_diag_logpdf(z, mu_p, sig_p) -
                          gauss_diag_logpdf(z, mu_q, sig_q);
        st = advance_state(m, st, ws.phi_x_out, ws.phi_z_out, ws);
      }
      for (int j = 0; j < n; ++j) logW[size_t(j)] += logw[size_t(j)];
      const double lp = logsumexp(logW);
      rows.push_back({t, track.time_at(t), true, lp});
      for (int j = 0; j < n; ++j) {
        logW[size_t(j)] -= lp;
        w_lin[size_t(j)] = std::exp(logW[size_t(j)]);
      }
      if (effective_sample_size(w_lin) < double(n) / 2.0) {
        auto idx = systematic_resample(w_lin, rng.uniform() / double(n));
        for (int k = 0; k < n; ++k) reordered[size_t(k)] = states[size_t(idx[size_t(k)])];
        states.swap(reordered);
        std::fill(logW.begin(), logW.end(), -std::log(double(n)));
      }
    } else {
      for (int j = 0; j < n; ++j) {
        nn::LstmState& st = states[size_t(j)];
        prior_params(m, st.h, mu_p, sig_p, ws);
        for (int i = 0; i < Z; ++i)
          z[size_t(i)] = mu_p[size_t(i)] + sig_p[size_t(i)] * rng.normal();
        emission_logits_for(m, st.h, z, logits, ws);
        const FourHotVector xhat = sample_blocks(logits, layout, rng);
        phi_x_of(m, xhat, ws);
        st = advance_state(m, st, ws.phi_x_out, ws.phi_z_out, ws);
      }
      rows.push_back({t, track.time_at(t), false,
                      std::numeric_limits<double>::quiet_NaN()});
    }
  }
  return rows;
}

double is_loglik(const VrnnModel& m, std::span<const FourHotVector> xs,
                 int n_samples, std::uint64_t seed, double* mc_sigma) {
  if (n_samples <= 0) throw ConfigError("is_loglik: n_samples must be positive");
  const int Z = m.latent();
  Rng rng(derive_seed(seed, "is-loglik"));
  std::vector<double> logw(size_t(n_samples), 0.0);
  std::vector<double> mu_p, sig_p, mu_q, sig_q, logits;
  std::vector<double> z(size_t(Z), 0.0);
  VrnnWorkspace ws;
  for (int j = 0; j < n_samples; ++j) {
    nn::LstmState st = m.initial_state();
    for (const FourHotVector& x : xs) {
      prior_params(m, st.h, mu_p, sig_p, ws);
      posterior_params(m, st.h, x, mu_q, sig_q, ws);
      for (int i = 0; i < Z; ++i)
        z[size_t(i)] = mu_q[size_t(i)] + sig_q[size_t(i)] * rng.normal();
      emission_logits_for(m, st.h, z, logits, ws);
      logw[size_t(j)] += bernoulli_fourhot_logprob(x, m.layout(), logits) +
                         gauss_diag_logpdf(z, mu_p, sig_p) -
                         gauss_diag_logpdf(z, mu_q, sig_q);
      st = advance_state(m, st, ws.phi_x_out, ws.phi_z_out, ws);
    }
  }
  const double est = logsumexp(logw) - std::log(double(n_samples));
  if (mc_sigma) {
    *mc_sigma = 0.0;
    if (n_samples > 1) {
      const double mx = *std::max_element(logw.begin(), logw.end());
      double mean = 0.0;
      for (double lw : logw) mean += std::exp(lw - mx);
      mean /= double(n_samples);
      double var = 0.0;
      for (double lw : logw) {
        const double d = std::exp(lw - mx) - mean;
        var += d * d;
      }
      var /= double(n_samples - 1);
      *mc_sigma = std::sqrt(var / double(n_samples)) / mean;
    }
  }
  return est;
}

std::vector<Regime> regimes(const VrnnModel& m, const GridTrack& track) {
  const int T = int(track.slots.size());
  const auto& roi = m.cfg.roi;
  std::vector<Regime> out;
  out.reserve(size_t(T));
  nn::LstmState st = m.initial_state();
  std::vector<double> mu, sig, logits;
  VrnnWorkspace ws;
  for (int t = 0; t < T; ++t) {
    Regime r;
    r.h = st.h;
    if (track.observed(t)) {
      const FourHotVector x = encode(*track.slots[size_t(t)], roi);
      posterior_params(m, st.h, x, mu, sig, ws);
      r.z = mu;
      emission_logits_for(m, st.h, r.z, logits, ws);
    } else {
      prior_params(m, st.h, mu, sig, ws);
      r.z = mu;
      emission_logits_for(m, st.h, r.z, logits, ws);
      const FourHotVector xhat = argmax_blocks(logits, m.layout());
      phi_x_of(m, xhat, ws);
    }
    st = advance_state(m, st, ws.phi_x_out, ws.phi_z_out, ws);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace aistk::vrnn
