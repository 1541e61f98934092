#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aistk/ais/types.hpp"
#include "aistk/nn/layers.hpp"
#include "aistk/rng.hpp"
#include "aistk/tensor.hpp"
#include "aistk/vrnn/model.hpp"

namespace aistk {

inline constexpr int kDayCols = 144;   // 10-minute steps in one day
inline constexpr int kNumClasses = 4;  // cargo, passenger, tanker, tug

/// One day of hidden regimes as an image: rows are [h; z] components, columns
/// are time steps. Shorter tracks are padded by repeating the last regime.
struct RegimeMatrix {
    Tensor m;  // [H x 144] with H = hidden_dim + latent_dim
    std::optional<VesselType> label;
    std::string track_id;
};

/// Track span must be at most 24h; throws DomainError otherwise or when the
/// track has no messages. Missing grid slots are filled through the regime
/// recurrence itself, so the matrix always has 144 columns.
RegimeMatrix build_matrix(const vrnn::VrnnModel& model, const Track& track);

/// Splits tracks longer than 24h at day boundaries (suffixing ids with /dN),
/// then builds one matrix per piece, in input order.
std::vector<RegimeMatrix> build_matrices(const vrnn::VrnnModel& model,
                                         const std::vector<Track>& tracks, int threads = 1);

struct CnnConfig {
    int in_rows = 0;  // regime dimension H
    int conv1_ch = 16;
    int conv2_ch = 16;
    int kernel_w = 5;
};

/// conv(H x kw) -> relu -> maxpool(2) -> conv(1 x kw) -> relu -> global
/// average pool -> dense logits over the four classes.
struct CnnModel {
    CnnConfig cfg;
    nn::Conv2d conv1;
    nn::Conv2d conv2;
    nn::Dense head;

    static CnnModel create(const CnnConfig& cfg, Rng& rng);
    std::vector<std::pair<std::string, Tensor*>> params();
    std::vector<std::pair<std::string, const Tensor*>> params() const;
};

struct Prediction {
    VesselType type;
    std::array<double, kNumClasses> prob;
};

/// Throws ShapeError if the matrix does not match the model geometry.
Prediction predict(const CnnModel& cnn, const RegimeMatrix& matrix);

/// Cross-entropy of one labeled matrix. When grads is given it is filled with
/// dLoss/dparam in params() order; this is the exact path the trainer uses.
double classifier_loss(const CnnModel& cnn, const RegimeMatrix& matrix, int label,
                       std::vector<Tensor>* grads = nullptr);

struct ClassifierTrainConfig {
    int epochs = 30;
    int batch_size = 16;
    double lr = 1e-3;
    std::uint64_t seed = 42;
    int threads = 1;
};

struct ClassifierEpoch {
    int epoch;
    double train_loss;  // mean cross-entropy
    double train_acc;
    double val_acc;  // NaN when no validation set was given
};

struct ClassifierHistory {
    std::vector<ClassifierEpoch> epochs;  // row 0 is the pre-training state
};

/// Requires every training matrix to carry one of the four class labels and
/// at least two distinct classes to be present (ConfigError otherwise).
ClassifierHistory train_classifier(CnnModel& cnn, const std::vector<RegimeMatrix>& train,
                                   const std::vector<RegimeMatrix>& val,
                                   const ClassifierTrainConfig& cfg);

struct ClassMetrics {
    double precision, recall, f1;  // NaN when the class is absent from the truth
    std::int64_t support;
};

struct ConfusionMetrics {
    std::vector<std::vector<std::int64_t>> confusion;  // [truth][predicted]
    std::vector<ClassMetrics> per_class;
    double macro_precision, macro_recall, macro_f1;  // mean over present classes
    double micro_precision, micro_recall, micro_f1;
    double accuracy;
};

/// Derives every metric from a square confusion matrix.
ConfusionMetrics metrics_from_confusion(const std::vector<std::vector<std::int64_t>>& confusion);

/// Predicts each labeled matrix and reduces to a 4x4 confusion report.
ConfusionMetrics evaluate(const CnnModel& cnn, const std::vector<RegimeMatrix>& test);

void save_classifier(const CnnModel& cnn, const std::filesystem::path& path);
CnnModel load_classifier(const std::filesystem::path& path);

}  // namespace aistk
