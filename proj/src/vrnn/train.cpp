#include "aistk/vrnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "aistk/errors.hpp"
#include "aistk/nn/adam.hpp"
#include "aistk/parallel.hpp"

namespace aistk::vrnn {

namespace {

std::vector<double> gauss_noise(std::uint64_t seed, int count) {
  Rng rng(seed);
  std::vector<double> out(size_t(count), 0.0);
  for (double& v : out) v = rng.normal();
  return out;
}

}  // namespace

double eval_elbo_per_step(const VrnnModel& m,
                          const std::vector<std::vector<FourHotVector>>& tracks,
                          std::uint64_t seed, int threads) {
  if (tracks.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::uint64_t base = derive_seed(seed, "vrnn/eval-noise");
  const int Z = m.latent();
  std::vector<double> per_track(tracks.size(), 0.0);
  parallel_for(int(tracks.size()), threads, [&](int i) {
    const auto& xs = tracks[size_t(i)];
    auto noise = gauss_noise(derive_seed(base, std::uint64_t(i)),
                             int(xs.size()) * Z);
    per_track[size_t(i)] = vrnn_elbo(m, xs, noise).total;
  });
  double total = 0.0;
  std::int64_t steps = 0;
  for (size_t i = 0; i < tracks.size(); ++i) {
    total += per_track[i];
    steps += std::int64_t(tracks[i].size());
  }
  return steps > 0 ? total / double(steps) : 0.0;
}

TrainHistory vrnn_train(VrnnModel& m,
                        const std::vector<std::vector<FourHotVector>>& train,
                        const std::vector<std::vector<FourHotVector>>& val,
                        const TrainConfig& cfg) {
  if (train.empty()) throw ConfigError("vrnn_train: empty training set");
  if (cfg.epochs < 0) throw ConfigError("vrnn_train: negative epoch count");
  if (cfg.batch_size <= 0) throw ConfigError("vrnn_train: batch_size must be positive");

  auto named = m.params();
  std::vector<Tensor*> params;
  params.reserve(named.size());
  for (auto& [name, t] : named) params.push_back(t);

  nn::AdamOptimizer opt(cfg.lr);
  Rng shuffle_rng = Rng::substream(cfg.seed, "vrnn/shuffle");
  const std::uint64_t noise_base = derive_seed(cfg.seed, "vrnn/train-noise");
  const int Z = m.latent();
  const int workers = std::max(1, cfg.threads);

  TrainHistory hist;
  auto record = [&](int epoch) {
    hist.rows.push_back({epoch, eval_elbo_per_step(m, train, cfg.seed, cfg.threads),
                         eval_elbo_per_step(m, val, cfg.seed, cfg.threads)});
  };
  record(0);

  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<VrnnGrads> worker_grads;
  worker_grads.reserve(size_t(workers));
  for (int w = 0; w < workers; ++w) worker_grads.emplace_back(m);
  std::vector<double> track_elbo(train.size(), 0.0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[size_t(shuffle_rng.uniform_int(i))]);

    for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + size_t(cfg.batch_size));
      const int batch_n = int(end - start);

      std::int64_t batch_steps = 0;
      for (size_t i = start; i < end; ++i)
        batch_steps += std::int64_t(train[size_t(order[i])].size());
      if (batch_steps == 0) continue;
      const double scale = 1.0 / double(batch_steps);

      for (auto& g : worker_grads) g.zero();
      parallel_ranges(batch_n, workers, [&](int w, int lo, int hi) {
        for (int i = lo; i < hi; ++i) {
          const int idx = order[start + size_t(i)];
          const auto& xs = train[size_t(idx)];
          auto noise = gauss_noise(
              derive_seed(noise_base, std::uint64_t(epoch), std::uint64_t(idx)),
              int(xs.size()) * Z);
          track_elbo[size_t(i)] =
              vrnn_backprop_track(m, xs, noise, scale, worker_grads[size_t(w)]);
        }
      });

      double batch_elbo = 0.0;
      for (int i = 0; i < batch_n; ++i) batch_elbo += track_elbo[size_t(i)];
      if (!std::isfinite(batch_elbo))
        throw NumericError("vrnn_train: non-finite loss at epoch " +
                           std::to_string(epoch));

      for (int w = 1; w < workers; ++w) worker_grads[0].add(worker_grads[size_t(w)]);
      auto gts = worker_grads[0].tensors();
      std::vector<const Tensor*> grads(gts.begin(), gts.end());
      opt.step(params, grads);
    }

    if (epoch == cfg.epochs) m.quantize_f32();
    record(epoch);
  }
  if (cfg.epochs == 0) m.quantize_f32();
  return hist;
}

}  // namespace aistk::vrnn
