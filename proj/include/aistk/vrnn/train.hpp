#pragma once

#include <cstdint>
#include <vector>

#include "aistk/vrnn/model.hpp"

namespace aistk::vrnn {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double lr = 3e-4;
  std::uint64_t seed = 42;
  int threads = 1;
};

struct EpochStats {
  int epoch;              // 0 = before any update
  double train_elbo;      // mean per-step ELBO over the training set
  double val_elbo;        // mean per-step ELBO over the validation set
};

struct TrainHistory {
  std::vector<EpochStats> rows;
};

/// Minibatch Adam on the negative ELBO. Batch gradients are the sum of the
/// per-track gradients divided by the total step count of the batch.
///
/// The per-epoch ELBO columns are evaluated with a fixed evaluation noise per
/// track (independent of shuffling and of lr), so two runs with the same seed
/// produce identical histories and lr = 0 produces a flat curve. Row 0 is
/// recorded before the first update. Parameters are rounded to binary32 after
/// the last epoch so that a saved checkpoint reproduces in-memory scores.
///
/// Throws NumericError if a batch loss or gradient goes non-finite, and
/// ConfigError on an empty training set.
TrainHistory vrnn_train(VrnnModel& m,
                        const std::vector<std::vector<FourHotVector>>& train,
                        const std::vector<std::vector<FourHotVector>>& val,
                        const TrainConfig& cfg);

/// Mean per-step ELBO over a track set with the fixed evaluation noise.
double eval_elbo_per_step(const VrnnModel& m,
                          const std::vector<std::vector<FourHotVector>>& tracks,
                          std::uint64_t seed, int threads);

}  // namespace aistk::vrnn
