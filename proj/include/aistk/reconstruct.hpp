#pragma once

#include <cstdint>
#include <vector>

#include "aistk/ais/types.hpp"
#include "aistk/fourhot.hpp"
#include "aistk/vrnn/score.hpp"

namespace aistk {

enum class FillMethod { observed, model, cv };
const char* fill_method_name(FillMethod m);

struct FilledStep {
    int slot = 0;
    std::int64_t timestamp = 0;
    Kinematics kin{};
    FillMethod method = FillMethod::observed;
};

/// A gap-free version of a grid track: one step per slot.
struct Reconstruction {
    std::vector<FilledStep> steps;
};

struct ReconstructConfig {
    int n_particles = 50;
    std::uint64_t seed = 7;
    double tau = -1e30;        // confidence threshold on mean prefix log-likelihood
    int confidence_window = 6;  // prefix steps entering the confidence mean
    int score_samples = 50;     // particles for the confidence scoring pass
};

/// Model-mode fill of every missing slot. Particles follow the filtering
/// posterior through observed spans (with systematic resampling below half
/// effective sample size); across a gap each particle samples the latent from
/// the prior and one bin per attribute block from the emission. When a gap
/// closes, the next observation's importance weight reweights the particles
/// and the best particle's sampled path, decoded to bin centers, fills the
/// gap. A trailing gap is filled by the best particle at end of track.
/// Throws UnsupportedInputError if the track starts inside a gap.
Reconstruction reconstruct_gap(const vrnn::VrnnModel& m, const GridTrack& track,
                               int n_particles = 50, std::uint64_t seed = 7);

/// Constant-velocity fill: position and sog interpolate linearly between the
/// gap's bracketing observations, cog along the shortest arc. One-sided gaps
/// dead-reckon with the nearest observation's sog/cog. If roi is given,
/// extrapolated positions are clamped to it.
Reconstruction cv_fill(const GridTrack& track, const RoiConfig* roi = nullptr);

/// `cv` when the mean stepwise log-likelihood over the last
/// `confidence_window` observed prefix steps falls below tau (or the prefix is
/// empty), else `model`.
FillMethod confidence_switch(const vrnn::VrnnModel& m, const GridTrack& prefix, double tau,
                             int confidence_window = 6, int score_samples = 50,
                             std::uint64_t seed = 7);

/// Fills every gap, deciding model vs constant velocity per gap via
/// confidence_switch on that gap's observed prefix.
Reconstruction reconstruct_track(const vrnn::VrnnModel& m, const GridTrack& track,
                                 const ReconstructConfig& cfg);

/// The first `n_slots` slots as a standalone grid track.
GridTrack truncated(const GridTrack& track, int n_slots);

}  // namespace aistk
