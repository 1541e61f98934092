#include "aistk/vrnn/model.hpp"

#include <cmath>
#include <cstring>

#include "aistk/errors.hpp"

namespace aistk::vrnn {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

void fc_into(const nn::Dense& d, std::span<const double> x, std::vector<double>& out) {
  out.assign(size_t(d.out_dim()), 0.0);
  const int n_out = d.out_dim(), n_in = d.in_dim();
  check(int(x.size()) == n_in, "fc_into: input size");
  for (int r = 0; r < n_out; ++r) {
    double acc = d.b.data[size_t(r)];
    const double* wrow = &d.W.data[size_t(r) * size_t(n_in)];
    for (int col = 0; col < n_in; ++col) acc += wrow[col] * x[size_t(col)];
    out[size_t(r)] = nn::apply_activation(d.act, acc);
  }
}

void concat2(std::span<const double> a, std::span<const double> b,
             std::vector<double>& out) {
  out.resize(a.size() + b.size());
  std::copy(a.begin(), a.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + std::ptrdiff_t(a.size()));
}

}  // namespace

VrnnModel VrnnModel::create(const VrnnConfig& cfg, Rng& rng) {
  if (cfg.hidden_dim <= 0 || cfg.latent_dim <= 0)
    throw ConfigError("vrnn dims must be positive");
  if (cfg.sigma_floor <= 0.0) throw ConfigError("sigma_floor must be positive");
  if (cfg.roi.total_bins() <= 0)
    throw ConfigError("roi bin counts are unset; call RoiConfig::finalize first");

  VrnnModel m;
  m.cfg = cfg;
  m.rebuild_layout();
  const int H = cfg.hidden_dim, Z = cfg.latent_dim, L = m.layout_.total;

  m.phi_x = nn::Dense(L, H, nn::Activation::relu);
  m.phi_z = nn::Dense(Z, H, nn::Activation::relu);
  m.prior_hidden = nn::Dense(H, H, nn::Activation::relu);
  m.prior_mu = nn::Dense(H, Z, nn::Activation::identity);
  m.prior_sigma = nn::Dense(H, Z, nn::Activation::softplus);
  m.post_hidden = nn::Dense(2 * H, H, nn::Activation::relu);
  m.post_mu = nn::Dense(H, Z, nn::Activation::identity);
  m.post_sigma = nn::Dense(H, Z, nn::Activation::softplus);
  m.emis_hidden = nn::Dense(2 * H, H, nn::Activation::relu);
  m.emis_logits = nn::Dense(H, L, nn::Activation::identity);
  m.lstm = nn::LstmCell(2 * H, H);

  m.phi_x.init(rng);
  m.phi_z.init(rng);
  m.prior_hidden.init(rng);
  m.prior_mu.init(rng);
  m.prior_sigma.init(rng);
  m.post_hidden.init(rng);
  m.post_mu.init(rng);
  m.post_sigma.init(rng);
  m.emis_hidden.init(rng);
  m.emis_logits.init(rng);
  m.lstm.init(rng);
  return m;
}

std::vector<std::pair<std::string, Tensor*>> VrnnModel::params() {
  return {
      {"phi_x.W", &phi_x.W},             {"phi_x.b", &phi_x.b},
      {"phi_z.W", &phi_z.W},             {"phi_z.b", &phi_z.b},
      {"prior_hidden.W", &prior_hidden.W}, {"prior_hidden.b", &prior_hidden.b},
      {"prior_mu.W", &prior_mu.W},       {"prior_mu.b", &prior_mu.b},
      {"prior_sigma.W", &prior_sigma.W}, {"prior_sigma.b", &prior_sigma.b},
      {"post_hidden.W", &post_hidden.W}, {"post_hidden.b", &post_hidden.b},
      {"post_mu.W", &post_mu.W},         {"post_mu.b", &post_mu.b},
      {"post_sigma.W", &post_sigma.W},   {"post_sigma.b", &post_sigma.b},
      {"emis_hidden.W", &emis_hidden.W}, {"emis_hidden.b", &emis_hidden.b},
      {"emis_logits.W", &emis_logits.W}, {"emis_logits.b", &emis_logits.b},
      {"lstm.Wx", &lstm.Wx},             {"lstm.Wh", &lstm.Wh},
      {"lstm.b", &lstm.b},
  };
}

std::vector<std::pair<std::string, const Tensor*>> VrnnModel::params() const {
  auto mut = const_cast<VrnnModel*>(this)->params();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

std::int64_t VrnnModel::param_count() const {
  std::int64_t n = 0;
  for (auto& [name, t] : params()) n += std::int64_t(t->data.size());
  return n;
}

void VrnnModel::quantize_f32() {
  for (auto& [name, t] : params())
    for (double& v : t->data) v = double(float(v));
}

LstmState VrnnModel::initial_state() const { return LstmState(cfg.hidden_dim); }

VrnnGrads::VrnnGrads(const VrnnModel& m)
    : phi_x(m.phi_x), phi_z(m.phi_z), prior_hidden(m.prior_hidden),
      prior_mu(m.prior_mu), prior_sigma(m.prior_sigma), post_hidden(m.post_hidden),
      post_mu(m.post_mu), post_sigma(m.post_sigma), emis_hidden(m.emis_hidden),
      emis_logits(m.emis_logits), lstm(m.lstm) {}

std::vector<Tensor*> VrnnGrads::tensors() {
  return {&phi_x.dW,        &phi_x.db,        &phi_z.dW,       &phi_z.db,
          &prior_hidden.dW, &prior_hidden.db, &prior_mu.dW,    &prior_mu.db,
          &prior_sigma.dW,  &prior_sigma.db,  &post_hidden.dW, &post_hidden.db,
          &post_mu.dW,      &post_mu.db,      &post_sigma.dW,  &post_sigma.db,
          &emis_hidden.dW,  &emis_hidden.db,  &emis_logits.dW, &emis_logits.db,
          &lstm.dWx,        &lstm.dWh,        &lstm.db};
}

std::vector<const Tensor*> VrnnGrads::tensors() const {
  auto mut = const_cast<VrnnGrads*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

void VrnnGrads::zero() {
  for (Tensor* t : tensors()) t->fill(0.0);
}

void VrnnGrads::add(const VrnnGrads& other) {
  auto mine = tensors();
  auto theirs = other.tensors();
  for (size_t i = 0; i < mine.size(); ++i) {
    check(mine[i]->data.size() == theirs[i]->data.size(), "VrnnGrads::add");
    for (size_t k = 0; k < mine[i]->data.size(); ++k)
      mine[i]->data[k] += theirs[i]->data[k];
  }
}

void VrnnGrads::scale(double s) {
  for (Tensor* t : tensors())
    for (double& v : t->data) v *= s;
}

bool VrnnGrads::all_finite() const {
  for (const Tensor* t : tensors())
    if (!t->all_finite()) return false;
  return true;
}

// -- distributions -----------------------------------------------------------

double kl_gauss_diag(std::span<const double> mu_q, std::span<const double> sigma_q,
                     std::span<const double> mu_p, std::span<const double> sigma_p) {
  check(mu_q.size() == sigma_q.size() && mu_q.size() == mu_p.size() &&
            mu_q.size() == sigma_p.size(),
        "kl_gauss_diag: size mismatch");
  double kl = 0.0;
  for (size_t i = 0; i < mu_q.size(); ++i) {
    double d = mu_q[i] - mu_p[i];
    double vq = sigma_q[i] * sigma_q[i];
    double vp = sigma_p[i] * sigma_p[i];
    kl += std::log(sigma_p[i] / sigma_q[i]) + (vq + d * d) / (2.0 * vp) - 0.5;
  }
  return kl;
}

void kl_gauss_diag_backward(std::span<const double> mu_q,
                            std::span<const double> sigma_q,
                            std::span<const double> mu_p,
                            std::span<const double> sigma_p, double scale,
                            std::span<double> d_mu_q, std::span<double> d_sigma_q,
                            std::span<double> d_mu_p, std::span<double> d_sigma_p) {
  for (size_t i = 0; i < mu_q.size(); ++i) {
    double d = mu_q[i] - mu_p[i];
    double vp = sigma_p[i] * sigma_p[i];
    double g_mu = d / vp;
    d_mu_q[i] += scale * g_mu;
    d_mu_p[i] -= scale * g_mu;
    d_sigma_q[i] += scale * (sigma_q[i] / vp - 1.0 / sigma_q[i]);
    d_sigma_p[i] += scale * (1.0 / sigma_p[i] -
                             (sigma_q[i] * sigma_q[i] + d * d) / (vp * sigma_p[i]));
  }
}

double bernoulli_fourhot_logprob(const FourHotVector& x, const BlockLayout& layout,
                                 std::span<const double> logits) {
  check(int(logits.size()) == layout.total, "bernoulli logprob: logits size");
  double lp = 0.0;
  for (int k : x.ones(layout)) lp += logits[size_t(k)];
  for (double l : logits) lp -= nn::apply_activation(nn::Activation::softplus, l);
  return lp;
}

void bernoulli_fourhot_logprob_backward(const FourHotVector& x,
                                        const BlockLayout& layout,
                                        std::span<const double> logits,
                                        double scale, std::span<double> d_logits) {
  for (size_t i = 0; i < logits.size(); ++i)
    d_logits[i] -= scale * nn::apply_activation(nn::Activation::sigmoid, logits[i]);
  for (int k : x.ones(layout)) d_logits[size_t(k)] += scale;
}

double gauss_diag_logpdf(std::span<const double> z, std::span<const double> mu,
                         std::span<const double> sigma) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  double lp = 0.0;
  for (size_t i = 0; i < z.size(); ++i) {
    double u = (z[i] - mu[i]) / sigma[i];
    lp += -half_log_2pi - std::log(sigma[i]) - 0.5 * u * u;
  }
  return lp;
}

// -- forward step ------------------------------------------------------------

void vrnn_forward_step(const VrnnModel& m, const LstmState& state,
                       const FourHotVector& x, std::span<const double> eps,
                       StepValues& out, LstmState& next, StepCache* cache) {
  static thread_local StepCache scratch;
  StepCache& c = cache ? *cache : scratch;
  const int H = m.hidden(), Z = m.latent();
  check(int(eps.size()) == Z, "vrnn_forward_step: eps size");
  check(int(state.h.size()) == H, "vrnn_forward_step: state size");

  c.x = x;
  c.eps.assign(eps.begin(), eps.end());
  auto ones = x.ones(m.layout());

  m.phi_x.forward_ones(std::span<const int>(ones.data(), ones.size()), c.phi_x_c);

  m.prior_hidden.forward(state.h, c.prior_hidden_c);
  m.prior_mu.forward(c.prior_hidden_c.out, c.prior_mu_c);
  m.prior_sigma.forward(c.prior_hidden_c.out, c.prior_sigma_c);
  out.prior_mu = c.prior_mu_c.out;
  out.prior_sigma = c.prior_sigma_c.out;
  for (double& s : out.prior_sigma) s += m.cfg.sigma_floor;

  std::vector<double> concat_xh;
  concat2(c.phi_x_c.out, state.h, concat_xh);
  m.post_hidden.forward(concat_xh, c.post_hidden_c);
  m.post_mu.forward(c.post_hidden_c.out, c.post_mu_c);
  m.post_sigma.forward(c.post_hidden_c.out, c.post_sigma_c);
  out.post_mu = c.post_mu_c.out;
  out.post_sigma = c.post_sigma_c.out;
  for (double& s : out.post_sigma) s += m.cfg.sigma_floor;

  out.z.resize(size_t(Z));
  for (int i = 0; i < Z; ++i)
    out.z[size_t(i)] = out.post_mu[size_t(i)] + out.post_sigma[size_t(i)] * eps[size_t(i)];

  m.phi_z.forward(out.z, c.phi_z_c);
  std::vector<double> concat_zh;
  concat2(c.phi_z_c.out, state.h, concat_zh);
  m.emis_hidden.forward(concat_zh, c.emis_hidden_c);
  m.emis_logits.forward(c.emis_hidden_c.out, c.emis_logits_c);
  out.logits = c.emis_logits_c.out;

  std::vector<double> lstm_in;
  concat2(c.phi_x_c.out, c.phi_z_c.out, lstm_in);
  next = m.lstm.step(lstm_in, state, c.lstm_c);

  if (cache) cache->vals = out;
}

// -- per-track backprop ------------------------------------------------------

double vrnn_backprop_track(const VrnnModel& m,
                           std::span<const FourHotVector> xs,
                           std::span<const double> noise, double scale,
                           VrnnGrads& g) {
  const int T = int(xs.size());
  const int H = m.hidden(), Z = m.latent(), L = m.bins();
  if (T == 0) return 0.0;
  check(int(noise.size()) == T * Z, "vrnn_backprop_track: noise size");

  std::vector<StepCache> caches;
  caches.resize(size_t(T));
  std::vector<StepValues> vals;
  vals.resize(size_t(T));
  LstmState state = m.initial_state();
  double elbo = 0.0;
  for (int t = 0; t < T; ++t) {
    LstmState next;
    vrnn_forward_step(m, state, xs[size_t(t)],
                      noise.subspan(size_t(t) * size_t(Z), size_t(Z)),
                      vals[size_t(t)], next, &caches[size_t(t)]);
    const StepValues& v = vals[size_t(t)];
    elbo += bernoulli_fourhot_logprob(xs[size_t(t)], m.layout(), v.logits) -
            kl_gauss_diag(v.post_mu, v.post_sigma, v.prior_mu, v.prior_sigma);
    state = std::move(next);
  }

  std::vector<double> dh_next(size_t(H), 0.0), dc_next(size_t(H), 0.0);
  std::vector<double> dh_cur(size_t(H), 0.0), dc_cur(size_t(H), 0.0);
  std::vector<double> dlstm_in(size_t(2 * H), 0.0), dlogits(size_t(L), 0.0);
  std::vector<double> demis_h(size_t(H), 0.0), dconcat(size_t(2 * H), 0.0);
  std::vector<double> dphi_x(size_t(H), 0.0), dphi_z(size_t(H), 0.0), dz(size_t(Z), 0.0);
  std::vector<double> dmu_q(size_t(Z), 0.0), dsig_q(size_t(Z), 0.0);
  std::vector<double> dmu_p(size_t(Z), 0.0), dsig_p(size_t(Z), 0.0);
  std::vector<double> dpost_h(size_t(H), 0.0), dprior_h(size_t(H), 0.0);

  for (int t = T - 1; t >= 0; --t) {
    const StepCache& c = caches[size_t(t)];
    const StepValues& v = vals[size_t(t)];

    std::fill(dh_cur.begin(), dh_cur.end(), 0.0);
    std::fill(dc_cur.begin(), dc_cur.end(), 0.0);
    std::fill(dlstm_in.begin(), dlstm_in.end(), 0.0);
    m.lstm.backward(dh_next, dc_next, c.lstm_c, g.lstm, dlstm_in, dh_cur, dc_cur);
    std::copy(dlstm_in.begin(), dlstm_in.begin() + H, dphi_x.begin());
    std::copy(dlstm_in.begin() + H, dlstm_in.end(), dphi_z.begin());

    std::fill(dlogits.begin(), dlogits.end(), 0.0);
    bernoulli_fourhot_logprob_backward(c.x, m.layout(), v.logits, -scale, dlogits);
    std::fill(demis_h.begin(), demis_h.end(), 0.0);
    m.emis_logits.backward(dlogits, c.emis_logits_c, g.emis_logits, demis_h);
    std::fill(dconcat.begin(), dconcat.end(), 0.0);
    m.emis_hidden.backward(demis_h, c.emis_hidden_c, g.emis_hidden, dconcat);
    for (int i = 0; i < H; ++i) {
      dphi_z[size_t(i)] += dconcat[size_t(i)];
      dh_cur[size_t(i)] += dconcat[size_t(H + i)];
    }

    std::fill(dz.begin(), dz.end(), 0.0);
    m.phi_z.backward(dphi_z, c.phi_z_c, g.phi_z, dz);

    for (int i = 0; i < Z; ++i) {
      dmu_q[size_t(i)] = dz[size_t(i)];
      dsig_q[size_t(i)] = dz[size_t(i)] * c.eps[size_t(i)];
      dmu_p[size_t(i)] = 0.0;
      dsig_p[size_t(i)] = 0.0;
    }
    kl_gauss_diag_backward(v.post_mu, v.post_sigma, v.prior_mu, v.prior_sigma,
                           scale, dmu_q, dsig_q, dmu_p, dsig_p);

    std::fill(dpost_h.begin(), dpost_h.end(), 0.0);
    m.post_mu.backward(dmu_q, c.post_mu_c, g.post_mu, dpost_h);
    m.post_sigma.backward(dsig_q, c.post_sigma_c, g.post_sigma, dpost_h);
    std::fill(dconcat.begin(), dconcat.end(), 0.0);
    m.post_hidden.backward(dpost_h, c.post_hidden_c, g.post_hidden, dconcat);
    for (int i = 0; i < H; ++i) {
      dphi_x[size_t(i)] += dconcat[size_t(i)];
      dh_cur[size_t(i)] += dconcat[size_t(H + i)];
    }

    std::fill(dprior_h.begin(), dprior_h.end(), 0.0);
    m.prior_mu.backward(dmu_p, c.prior_mu_c, g.prior_mu, dprior_h);
    m.prior_sigma.backward(dsig_p, c.prior_sigma_c, g.prior_sigma, dprior_h);
    m.prior_hidden.backward(dprior_h, c.prior_hidden_c, g.prior_hidden, dh_cur);

    m.phi_x.backward(dphi_x, c.phi_x_c, g.phi_x);

    dh_next = dh_cur;
    dc_next = dc_cur;
  }
  return elbo;
}

ElboReport vrnn_elbo(const VrnnModel& m, std::span<const FourHotVector> xs,
                     std::span<const double> noise) {
  const int T = int(xs.size());
  const int Z = m.latent();
  check(int(noise.size()) == T * Z, "vrnn_elbo: noise size");
  ElboReport rep;
  rep.recon.resize(size_t(T));
  rep.kl.resize(size_t(T));
  LstmState state = m.initial_state();
  StepValues v;
  for (int t = 0; t < T; ++t) {
    LstmState next;
    vrnn_forward_step(m, state, xs[size_t(t)],
                      noise.subspan(size_t(t) * size_t(Z), size_t(Z)), v, next,
                      nullptr);
    rep.recon[size_t(t)] = bernoulli_fourhot_logprob(xs[size_t(t)], m.layout(), v.logits);
    rep.kl[size_t(t)] = kl_gauss_diag(v.post_mu, v.post_sigma, v.prior_mu, v.prior_sigma);
    rep.total += rep.recon[size_t(t)] - rep.kl[size_t(t)];
    state = std::move(next);
  }
  return rep;
}

// -- stateless pieces --------------------------------------------------------

void phi_x_of(const VrnnModel& m, const FourHotVector& x, VrnnWorkspace& ws) {
  const int H = m.hidden();
  ws.phi_x_out.resize(size_t(H));
  auto ones = x.ones(m.layout());
  for (int r = 0; r < H; ++r) {
    double acc = m.phi_x.b.data[size_t(r)];
    const double* wrow = &m.phi_x.W.data[size_t(r) * size_t(m.bins())];
    for (int k : ones) acc += wrow[k];
    ws.phi_x_out[size_t(r)] = nn::apply_activation(m.phi_x.act, acc);
  }
}

void prior_params(const VrnnModel& m, std::span<const double> h,
                  std::vector<double>& mu, std::vector<double>& sigma,
                  VrnnWorkspace& ws) {
  fc_into(m.prior_hidden, h, ws.hidden);
  fc_into(m.prior_mu, ws.hidden, mu);
  fc_into(m.prior_sigma, ws.hidden, sigma);
  for (double& s : sigma) s += m.cfg.sigma_floor;
}

void posterior_params(const VrnnModel& m, std::span<const double> h,
                      const FourHotVector& x, std::vector<double>& mu,
                      std::vector<double>& sigma, VrnnWorkspace& ws) {
  phi_x_of(m, x, ws);
  concat2(ws.phi_x_out, h, ws.concat);
  fc_into(m.post_hidden, ws.concat, ws.hidden);
  fc_into(m.post_mu, ws.hidden, mu);
  fc_into(m.post_sigma, ws.hidden, sigma);
  for (double& s : sigma) s += m.cfg.sigma_floor;
}

void emission_logits_for(const VrnnModel& m, std::span<const double> h,
                         std::span<const double> z, std::vector<double>& logits,
                         VrnnWorkspace& ws) {
  fc_into(m.phi_z, z, ws.phi_z_out);
  concat2(ws.phi_z_out, h, ws.concat);
  fc_into(m.emis_hidden, ws.concat, ws.hidden);
  fc_into(m.emis_logits, ws.hidden, logits);
}

LstmState advance_state(const VrnnModel& m, const LstmState& state,
                        std::span<const double> phi_x_out,
                        std::span<const double> phi_z_out, VrnnWorkspace& ws) {
  concat2(phi_x_out, phi_z_out, ws.concat);
  return m.lstm.step(ws.concat, state, ws.lstm_c);
}

}  // namespace aistk::vrnn
