#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "aistk/ais/types.hpp"
#include "aistk/vrnn/score.hpp"

namespace aistk {

struct Cell {
    double mean = 0.0;
    double std = 0.0;
    std::int64_t count = 0;
};

/// Per-cell mean/std of stepwise log-likelihoods on the validation set, plus
/// the detector calibration derived from the same scoring pass.
struct CellStats {
    double origin_lat = 0.0;  // projection anchor (ROI center)
    double origin_lon = 0.0;
    double cell_km = 10.0;
    int min_count = 20;
    double k_sigma = 2.0;
    double p0 = 0.0;                // abnormal-evolution rate over scoreable steps
    double global_threshold = 0.0;  // 5th percentile of per-track mean log-likelihood
    double loglik_p10 = 0.0;        // 10th percentile of step log-likelihoods
    std::map<std::pair<int, int>, Cell> cells;

    /// Floor rule on the equirectangular plane: an exact edge belongs to the
    /// cell with the larger index.
    std::pair<int, int> cell_of(double lat, double lon) const;
    const Cell* find(int i, int j) const;
    bool scoreable(const Cell& c) const { return c.count >= min_count; }
};

struct FitCellsConfig {
    double cell_km = 10.0;
    int min_count = 20;
    double k_sigma = 2.0;
    vrnn::ScoreConfig score;
    int threads = 1;
};

/// Scores every validation track stepwise and accumulates per-cell statistics.
/// Throws ConfigError on an empty validation set.
CellStats fit_cells(const vrnn::VrnnModel& m, const std::vector<GridTrack>& validation,
                    const FitCellsConfig& cfg = {});

/// CSV with `#`-prefixed metadata lines; numeric round trip is exact.
void save_cells(const CellStats& stats, const std::string& path);
CellStats load_cells(const std::string& path);

enum class Verdict { normal, abnormal, unscored };
const char* verdict_name(Verdict v);

enum class StepFlag { normal, abnormal, unscored, missing };
const char* step_flag_name(StepFlag f);

struct StepVerdict {
    int slot = 0;
    double logp = 0.0;  // NaN for missing slots
    StepFlag flag = StepFlag::missing;
};

struct WindowScore {
    int t_start = 0, t_end = 0;  // slot range [t_start, t_end)
    int n = 0, k = 0;            // scored and abnormal steps inside
    double nfa = 0.0;
};

struct Detection {
    std::string track_id;
    int t_start = 0, t_end = 0;
    Verdict verdict = Verdict::unscored;
    double evidence = 0.0;  // min NFA (contrario) or mean log-likelihood (global)
    std::vector<StepVerdict> steps;
    WindowScore best;  // minimal-NFA window, contrario only
};

/// Mean per-step log-likelihood against a fixed threshold.
Detection detect_global(const vrnn::VrnnModel& m, const GridTrack& track, double threshold,
                        const vrnn::ScoreConfig& score = {});

struct ContrarioConfig {
    double k_sigma = 2.0;
    double epsilon = 1.0;
    std::int64_t n_tests = 0;  // 0 = the number of windows in this track
    vrnn::ScoreConfig score;
};

/// Sliding 4-hour windows (stride one step): a step is an abnormal evolution
/// iff its cell is scoreable and logp < mean - k_sigma * std. A window with n
/// scored and k abnormal steps has NFA = n_tests * P[Binomial(n, p0) >= k];
/// the track is abnormal iff its minimal NFA falls below epsilon. Tracks
/// shorter than a window are tested as one window.
Detection detect_contrario(const vrnn::VrnnModel& m, const CellStats& stats,
                           const GridTrack& track, const ContrarioConfig& cfg = {});

/// log P[Binomial(n, p) >= k], exact via lgamma.
double log_binomial_tail(int n, int k, double p);

/// Reduce a cell's step scores to mean / population std / count.
Cell cell_from_scores(const std::vector<double>& logps);

/// Order statistic with linear interpolation between ranks; q in [0, 1].
double percentile(std::vector<double> values, double q);

}  // namespace aistk
