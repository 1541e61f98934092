#include "aistk/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "aistk/errors.hpp"
#include "aistk/geo.hpp"
#include "aistk/rng.hpp"

namespace aistk {

using vrnn::VrnnModel;
using vrnn::VrnnWorkspace;

const char* fill_method_name(FillMethod m) {
    switch (m) {
        case FillMethod::observed: return "observed";
        case FillMethod::model: return "model";
        case FillMethod::cv: return "cv";
    }
    return "?";
}

namespace {

Kinematics kin_of(const AisMessage& msg) { return {msg.lat, msg.lon, msg.sog, msg.cog}; }

FilledStep observed_step(const GridTrack& track, int slot) {
    return {slot, track.time_at(slot), kin_of(*track.slots[static_cast<std::size_t>(slot)]),
            FillMethod::observed};
}

}  // namespace

GridTrack truncated(const GridTrack& track, int n_slots) {
    GridTrack out = track;
    n_slots = std::clamp(n_slots, 0, track.size());
    out.slots.assign(track.slots.begin(), track.slots.begin() + n_slots);
    return out;
}

Reconstruction reconstruct_gap(const VrnnModel& m, const GridTrack& track, int n_particles,
                               std::uint64_t seed) {
    if (n_particles <= 0) throw ConfigError("reconstruct_gap: n_particles must be positive");
    const int T = track.size();
    Reconstruction rec;
    rec.steps.reserve(static_cast<std::size_t>(T));
    if (T == 0) return rec;
    if (!track.observed(0))
        throw UnsupportedInputError("reconstruct_gap: track '" + track.id +
                                    "' starts inside a gap; no prefix to condition on");

    const int n = n_particles;
    const int Z = m.latent();
    const auto& roi = m.cfg.roi;
    const BlockLayout& layout = m.layout();
    Rng rng(derive_seed(derive_seed(seed, "reconstruct"), track.id));

    std::vector<nn::LstmState> states(static_cast<std::size_t>(n), m.initial_state());
    std::vector<nn::LstmState> reordered(static_cast<std::size_t>(n), nn::LstmState{});
    std::vector<double> logW(static_cast<std::size_t>(n), -std::log(double(n)));
    std::vector<double> logw(static_cast<std::size_t>(n), 0.0), w_lin(static_cast<std::size_t>(n), 0.0);
    std::vector<double> mu_p, sig_p, mu_q, sig_q, logits;
    std::vector<double> z(static_cast<std::size_t>(Z), 0.0);
    VrnnWorkspace ws;

    // Sampled bins for the gap currently being crossed, one path per particle.
    std::vector<std::vector<FourHotVector>> gap_paths(static_cast<std::size_t>(n));
    int gap_start = -1;

    auto harvest_gap = [&](int gap_end) {
        int best = 0;
        for (int j = 1; j < n; ++j)
            if (logW[static_cast<std::size_t>(j)] > logW[static_cast<std::size_t>(best)]) best = j;
        const auto& path = gap_paths[static_cast<std::size_t>(best)];
        for (int s = gap_start; s < gap_end; ++s) {
            Kinematics kin = decode(path[static_cast<std::size_t>(s - gap_start)], roi);
            rec.steps.push_back({s, track.time_at(s), kin, FillMethod::model});
        }
        for (auto& p : gap_paths) p.clear();
        gap_start = -1;
    };

    for (int t = 0; t < T; ++t) {
        if (track.observed(t)) {
            const FourHotVector x = encode(*track.slots[static_cast<std::size_t>(t)], roi);
            for (int j = 0; j < n; ++j) {
                nn::LstmState& st = states[static_cast<std::size_t>(j)];
                prior_params(m, st.h, mu_p, sig_p, ws);
                posterior_params(m, st.h, x, mu_q, sig_q, ws);
                for (int i = 0; i < Z; ++i)
                    z[static_cast<std::size_t>(i)] =
                        mu_q[static_cast<std::size_t>(i)] + sig_q[static_cast<std::size_t>(i)] * rng.normal();
                emission_logits_for(m, st.h, z, logits, ws);
                logw[static_cast<std::size_t>(j)] = vrnn::bernoulli_fourhot_logprob(x, layout, logits) +
                                                    vrnn::gauss_diag_logpdf(z, mu_p, sig_p) -
                                                    vrnn::gauss_diag_logpdf(z, mu_q, sig_q);
                st = advance_state(m, st, ws.phi_x_out, ws.phi_z_out, ws);
            }
            for (int j = 0; j < n; ++j) logW[static_cast<std::size_t>(j)] += logw[static_cast<std::size_t>(j)];
            if (gap_start >= 0) harvest_gap(t);
            rec.steps.push_back(observed_step(track, t));

            const double lp = vrnn::logsumexp(logW);
            for (int j = 0; j < n; ++j) {
                logW[static_cast<std::size_t>(j)] -= lp;
                w_lin[static_cast<std::size_t>(j)] = std::exp(logW[static_cast<std::size_t>(j)]);
            }
            if (vrnn::effective_sample_size(w_lin) < double(n) / 2.0) {
                auto idx = vrnn::systematic_resample(w_lin, rng.uniform() / double(n));
                for (int k = 0; k < n; ++k)
                    reordered[static_cast<std::size_t>(k)] = states[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
                states.swap(reordered);
                std::fill(logW.begin(), logW.end(), -std::log(double(n)));
            }
        } else {
            if (gap_start < 0) gap_start = t;
            for (int j = 0; j < n; ++j) {
                nn::LstmState& st = states[static_cast<std::size_t>(j)];
                prior_params(m, st.h, mu_p, sig_p, ws);
                for (int i = 0; i < Z; ++i)
                    z[static_cast<std::size_t>(i)] =
                        mu_p[static_cast<std::size_t>(i)] + sig_p[static_cast<std::size_t>(i)] * rng.normal();
                emission_logits_for(m, st.h, z, logits, ws);
                const FourHotVector xhat = vrnn::sample_blocks(logits, layout, rng);
                gap_paths[static_cast<std::size_t>(j)].push_back(xhat);
                phi_x_of(m, xhat, ws);
                st = advance_state(m, st, ws.phi_x_out, ws.phi_z_out, ws);
            }
        }
    }
    if (gap_start >= 0) harvest_gap(T);
    return rec;
}

Reconstruction cv_fill(const GridTrack& track, const RoiConfig* roi) {
    const int T = track.size();
    Reconstruction rec;
    rec.steps.reserve(static_cast<std::size_t>(T));

    std::vector<int> observed;
    for (int t = 0; t < T; ++t)
        if (track.observed(t)) observed.push_back(t);
    if (observed.empty())
        throw UnsupportedInputError("cv_fill: track '" + track.id + "' has no observations");

    constexpr double DEG = std::numbers::pi / 180.0;
    auto dead_reckon = [&](const AisMessage& from, double dt_s) {
        LocalFrame frame(from.lat);
        double dist = knots_to_km_per_s(from.sog) * dt_s;
        Kinematics kin;
        kin.lat = from.lat + frame.km_to_dlat(dist * std::cos(from.cog * DEG));
        kin.lon = from.lon + frame.km_to_dlon(dist * std::sin(from.cog * DEG));
        kin.sog = from.sog;
        kin.cog = from.cog;
        if (roi) {
            kin.lat = std::clamp(kin.lat, roi->lat_min, roi->lat_max);
            kin.lon = std::clamp(kin.lon, roi->lon_min, roi->lon_max);
        }
        return kin;
    };

    for (int t = 0; t < T; ++t) {
        if (track.observed(t)) {
            rec.steps.push_back(observed_step(track, t));
            continue;
        }
        auto next = std::lower_bound(observed.begin(), observed.end(), t);
        FilledStep step{t, track.time_at(t), {}, FillMethod::cv};
        if (next == observed.begin()) {
            // Leading gap: reckon backwards from the first observation.
            const AisMessage& msg = *track.slots[static_cast<std::size_t>(observed.front())];
            step.kin = dead_reckon(msg, double(track.time_at(t) - msg.timestamp));
        } else if (next == observed.end()) {
            const AisMessage& msg = *track.slots[static_cast<std::size_t>(observed.back())];
            step.kin = dead_reckon(msg, double(track.time_at(t) - msg.timestamp));
        } else {
            const AisMessage& b = *track.slots[static_cast<std::size_t>(*next)];
            const AisMessage& a = *track.slots[static_cast<std::size_t>(*(next - 1))];
            double alpha = double(track.time_at(t) - a.timestamp) / double(b.timestamp - a.timestamp);
            step.kin.lat = a.lat + alpha * (b.lat - a.lat);
            step.kin.lon = a.lon + alpha * (b.lon - a.lon);
            step.kin.sog = a.sog + alpha * (b.sog - a.sog);
            step.kin.cog = circular_interp_deg(a.cog, b.cog, alpha);
        }
        rec.steps.push_back(step);
    }
    return rec;
}

FillMethod confidence_switch(const VrnnModel& m, const GridTrack& prefix, double tau,
                             int confidence_window, int score_samples, std::uint64_t seed) {
    if (prefix.size() == 0 || prefix.observed_count() == 0) return FillMethod::cv;
    vrnn::ScoreConfig cfg;
    cfg.n_samples = score_samples;
    cfg.seed = seed;
    auto scores = vrnn::stepwise_loglik(m, prefix, cfg);
    std::vector<double> tail;
    for (const auto& s : scores)
        if (s.observed && std::isfinite(s.logp)) tail.push_back(s.logp);
    if (tail.empty()) return FillMethod::cv;
    std::size_t k = std::min<std::size_t>(tail.size(), static_cast<std::size_t>(std::max(1, confidence_window)));
    double mean = 0.0;
    for (std::size_t i = tail.size() - k; i < tail.size(); ++i) mean += tail[i];
    mean /= double(k);
    return mean < tau ? FillMethod::cv : FillMethod::model;
}

Reconstruction reconstruct_track(const VrnnModel& m, const GridTrack& track,
                                 const ReconstructConfig& cfg) {
    const int T = track.size();
    Reconstruction cv = cv_fill(track, &m.cfg.roi);
    bool any_missing = false;
    for (int t = 0; t < T; ++t)
        if (!track.observed(t)) any_missing = true;
    if (!any_missing) return cv;

    // Decide per gap, then overlay model fills where the prefix is trusted.
    std::vector<FillMethod> choice(static_cast<std::size_t>(T), FillMethod::observed);
    bool any_model = false;
    int t = 0;
    while (t < T) {
        if (track.observed(t)) {
            ++t;
            continue;
        }
        int gap_start = t;
        while (t < T && !track.observed(t)) ++t;
        FillMethod method =
            gap_start == 0 ? FillMethod::cv
                           : confidence_switch(m, truncated(track, gap_start), cfg.tau,
                                               cfg.confidence_window, cfg.score_samples, cfg.seed);
        for (int s = gap_start; s < t; ++s) choice[static_cast<std::size_t>(s)] = method;
        if (method == FillMethod::model) any_model = true;
    }
    if (!any_model) return cv;

    int first_obs = 0;
    while (!track.observed(first_obs)) ++first_obs;
    GridTrack tail = track;
    if (first_obs > 0) {
        tail.t0 = track.time_at(first_obs);
        tail.slots.assign(track.slots.begin() + first_obs, track.slots.end());
    }
    Reconstruction model = reconstruct_gap(m, tail, cfg.n_particles, cfg.seed);
    Reconstruction out;
    out.steps.reserve(static_cast<std::size_t>(T));
    for (int s = 0; s < T; ++s) {
        if (choice[static_cast<std::size_t>(s)] == FillMethod::model) {
            FilledStep step = model.steps[static_cast<std::size_t>(s - first_obs)];
            step.slot = s;
            out.steps.push_back(step);
        } else {
            out.steps.push_back(cv.steps[static_cast<std::size_t>(s)]);
        }
    }
    return out;
}

}  // namespace aistk
