#include "aistk/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "aistk/binio.hpp"
#include "aistk/errors.hpp"
#include "aistk/geo.hpp"
#include "aistk/parallel.hpp"

namespace aistk {

std::pair<int, int> CellStats::cell_of(double lat, double lon) const {
    LocalFrame frame(origin_lat);
    double y = frame.dlat_to_km(lat - origin_lat);
    double x = frame.dlon_to_km(lon - origin_lon);
    return {static_cast<int>(std::floor(y / cell_km)), static_cast<int>(std::floor(x / cell_km))};
}

const Cell* CellStats::find(int i, int j) const {
    auto it = cells.find({i, j});
    return it == cells.end() ? nullptr : &it->second;
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::normal: return "normal";
        case Verdict::abnormal: return "abnormal";
        case Verdict::unscored: return "unscored";
    }
    return "?";
}

const char* step_flag_name(StepFlag f) {
    switch (f) {
        case StepFlag::normal: return "normal";
        case StepFlag::abnormal: return "abnormal";
        case StepFlag::unscored: return "unscored";
        case StepFlag::missing: return "missing";
    }
    return "?";
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ConfigError("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    double pos = q * static_cast<double>(values.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, values.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double log_binomial_tail(int n, int k, double p) {
    if (k <= 0) return 0.0;
    if (k > n) return -std::numeric_limits<double>::infinity();
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return 0.0;
    const double lp = std::log(p);
    const double l1p = std::log1p(-p);
    const double lgn = std::lgamma(double(n) + 1.0);
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(n - k + 1));
    for (int j = k; j <= n; ++j) {
        double t = lgn - std::lgamma(double(j) + 1.0) - std::lgamma(double(n - j) + 1.0) +
                   double(j) * lp + double(n - j) * l1p;
        terms.push_back(t);
        mx = std::max(mx, t);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    return std::min(0.0, mx + std::log(s));
}

Cell cell_from_scores(const std::vector<double>& logps) {
    Cell c;
    double mean = 0.0, m2 = 0.0;
    for (double x : logps) {
        ++c.count;
        double d = x - mean;
        mean += d / static_cast<double>(c.count);
        m2 += d * (x - mean);
    }
    c.mean = mean;
    c.std = c.count > 1 ? std::sqrt(m2 / static_cast<double>(c.count)) : 0.0;
    return c;
}

CellStats fit_cells(const vrnn::VrnnModel& m, const std::vector<GridTrack>& validation,
                    const FitCellsConfig& cfg) {
    if (validation.empty()) throw ConfigError("fit_cells: empty validation set");
    if (cfg.cell_km <= 0.0) throw ConfigError("fit_cells: cell_km must be positive");

    CellStats stats;
    stats.origin_lat = m.cfg.roi.lat_center();
    stats.origin_lon = m.cfg.roi.lon_center();
    stats.cell_km = cfg.cell_km;
    stats.min_count = cfg.min_count;
    stats.k_sigma = cfg.k_sigma;

    struct ScoredStep {
        std::pair<int, int> cell;
        double logp;
    };
    const int n_tracks = static_cast<int>(validation.size());
    std::vector<std::vector<ScoredStep>> per_track(static_cast<std::size_t>(n_tracks));
    std::vector<double> track_means(static_cast<std::size_t>(n_tracks),
                                    std::numeric_limits<double>::quiet_NaN());

    parallel_for(n_tracks, cfg.threads, [&](int ti) {
        const GridTrack& tr = validation[static_cast<std::size_t>(ti)];
        auto scores = vrnn::stepwise_loglik(m, tr, cfg.score);
        auto& out = per_track[static_cast<std::size_t>(ti)];
        double sum = 0.0;
        int count = 0;
        for (const auto& s : scores) {
            if (!s.observed || !std::isfinite(s.logp)) continue;
            const AisMessage& msg = *tr.slots[static_cast<std::size_t>(s.slot)];
            out.push_back({stats.cell_of(msg.lat, msg.lon), s.logp});
            sum += s.logp;
            ++count;
        }
        if (count > 0) track_means[static_cast<std::size_t>(ti)] = sum / count;
    });

    std::map<std::pair<int, int>, std::vector<double>> by_cell;
    std::vector<double> all_logp;
    for (const auto& steps : per_track)
        for (const auto& s : steps) {
            by_cell[s.cell].push_back(s.logp);
            all_logp.push_back(s.logp);
        }
    if (all_logp.empty()) throw ConfigError("fit_cells: no scoreable steps in the validation set");

    for (const auto& [key, logps] : by_cell) stats.cells[key] = cell_from_scores(logps);

    std::int64_t scoreable_steps = 0, abnormal_steps = 0;
    for (const auto& steps : per_track)
        for (const auto& s : steps) {
            const Cell* c = stats.find(s.cell.first, s.cell.second);
            if (!c || !stats.scoreable(*c)) continue;
            ++scoreable_steps;
            if (s.logp < c->mean - cfg.k_sigma * c->std) ++abnormal_steps;
        }
    stats.p0 = scoreable_steps > 0
                   ? std::max(static_cast<double>(abnormal_steps) / static_cast<double>(scoreable_steps), 1e-4)
                   : 1e-4;

    std::vector<double> means;
    for (double v : track_means)
        if (std::isfinite(v)) means.push_back(v);
    stats.global_threshold = percentile(means, 0.05);
    stats.loglik_p10 = percentile(std::move(all_logp), 0.10);
    return stats;
}

void save_cells(const CellStats& stats, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write cell stats: " + path);
    out << "# origin_lat " << fmt_g17(stats.origin_lat) << "\n";
    out << "# origin_lon " << fmt_g17(stats.origin_lon) << "\n";
    out << "# cell_km " << fmt_g17(stats.cell_km) << "\n";
    out << "# min_count " << stats.min_count << "\n";
    out << "# k_sigma " << fmt_g17(stats.k_sigma) << "\n";
    out << "# p0 " << fmt_g17(stats.p0) << "\n";
    out << "# global_threshold " << fmt_g17(stats.global_threshold) << "\n";
    out << "# loglik_p10 " << fmt_g17(stats.loglik_p10) << "\n";
    out << "cell_i,cell_j,mean,std,count\n";
    for (const auto& [key, c] : stats.cells)
        out << key.first << "," << key.second << "," << fmt_g17(c.mean) << "," << fmt_g17(c.std)
            << "," << c.count << "\n";
    if (!out) throw IoError("failed writing cell stats: " + path);
}

CellStats load_cells(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open cell stats: " + path);
    CellStats stats;
    std::string line;
    bool header_seen = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::istringstream ls(line.substr(1));
            std::string key, value;
            ls >> key >> value;
            if (key.empty()) continue;
            const std::string what = "cell stats " + key;
            if (key == "origin_lat")
                stats.origin_lat = parse_double(value, what);
            else if (key == "origin_lon")
                stats.origin_lon = parse_double(value, what);
            else if (key == "cell_km")
                stats.cell_km = parse_double(value, what);
            else if (key == "min_count")
                stats.min_count = static_cast<int>(parse_int(value, what));
            else if (key == "k_sigma")
                stats.k_sigma = parse_double(value, what);
            else if (key == "p0")
                stats.p0 = parse_double(value, what);
            else if (key == "global_threshold")
                stats.global_threshold = parse_double(value, what);
            else if (key == "loglik_p10")
                stats.loglik_p10 = parse_double(value, what);
            else
                throw FormatError("cell stats: unknown metadata key '" + key + "'");
            continue;
        }
        if (!header_seen) {
            if (line != "cell_i,cell_j,mean,std,count")
                throw FormatError("cell stats: unexpected header '" + line + "'");
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        std::string tok;
        std::vector<std::string> cols;
        while (std::getline(ls, tok, ',')) cols.push_back(tok);
        if (cols.size() != 5)
            throw FormatError("cell stats line " + std::to_string(lineno) + ": expected 5 columns");
        int i = static_cast<int>(parse_int(cols[0], "cell_i"));
        int j = static_cast<int>(parse_int(cols[1], "cell_j"));
        Cell c;
        c.mean = parse_double(cols[2], "cell mean");
        c.std = parse_double(cols[3], "cell std");
        c.count = parse_int(cols[4], "cell count");
        if (!stats.cells.emplace(std::make_pair(i, j), c).second)
            throw FormatError("cell stats: duplicate cell " + cols[0] + "," + cols[1]);
    }
    if (!header_seen) throw FormatError("cell stats: missing header row: " + path);
    return stats;
}

Detection detect_global(const vrnn::VrnnModel& m, const GridTrack& track, double threshold,
                        const vrnn::ScoreConfig& score) {
    Detection det;
    det.track_id = track.id;
    det.t_start = 0;
    det.t_end = track.size();
    auto scores = vrnn::stepwise_loglik(m, track, score);
    double sum = 0.0;
    int count = 0;
    for (const auto& s : scores) {
        StepVerdict sv{s.slot, s.logp, StepFlag::missing};
        if (s.observed && std::isfinite(s.logp)) {
            sv.flag = s.logp < threshold ? StepFlag::abnormal : StepFlag::normal;
            sum += s.logp;
            ++count;
        }
        det.steps.push_back(sv);
    }
    if (count == 0) {
        det.verdict = Verdict::unscored;
        det.evidence = std::numeric_limits<double>::quiet_NaN();
        return det;
    }
    det.evidence = sum / count;
    det.verdict = det.evidence < threshold ? Verdict::abnormal : Verdict::normal;
    return det;
}

Detection detect_contrario(const vrnn::VrnnModel& m, const CellStats& stats,
                           const GridTrack& track, const ContrarioConfig& cfg) {
    Detection det;
    det.track_id = track.id;
    auto scores = vrnn::stepwise_loglik(m, track, cfg.score);
    const int T = track.size();
    det.steps.reserve(static_cast<std::size_t>(T));
    for (const auto& s : scores) {
        StepVerdict sv{s.slot, s.logp, StepFlag::missing};
        if (s.observed && std::isfinite(s.logp)) {
            const AisMessage& msg = *track.slots[static_cast<std::size_t>(s.slot)];
            auto [ci, cj] = stats.cell_of(msg.lat, msg.lon);
            const Cell* c = stats.find(ci, cj);
            if (!c || !stats.scoreable(*c))
                sv.flag = StepFlag::unscored;
            else
                sv.flag = s.logp < c->mean - cfg.k_sigma * c->std ? StepFlag::abnormal
                                                                  : StepFlag::normal;
        }
        det.steps.push_back(sv);
    }

    const int window = std::max(1, 14400 / std::max(1, track.dt));  // 4 hours of slots
    const int W = std::min(window, T);
    const int n_windows = std::max(1, T - W + 1);
    const double n_tests =
        cfg.n_tests > 0 ? static_cast<double>(cfg.n_tests) : static_cast<double>(n_windows);

    // Prefix sums of scored/abnormal steps for O(1) window counts.
    std::vector<int> scored(static_cast<std::size_t>(T) + 1, 0), abnormal(static_cast<std::size_t>(T) + 1, 0);
    for (int t = 0; t < T; ++t) {
        StepFlag f = det.steps[static_cast<std::size_t>(t)].flag;
        scored[static_cast<std::size_t>(t) + 1] =
            scored[static_cast<std::size_t>(t)] + (f == StepFlag::normal || f == StepFlag::abnormal ? 1 : 0);
        abnormal[static_cast<std::size_t>(t) + 1] =
            abnormal[static_cast<std::size_t>(t)] + (f == StepFlag::abnormal ? 1 : 0);
    }

    WindowScore best;
    best.nfa = std::numeric_limits<double>::infinity();
    bool any_scored = false;
    for (int w = 0; w < n_windows; ++w) {
        int n = scored[static_cast<std::size_t>(w + W)] - scored[static_cast<std::size_t>(w)];
        int k = abnormal[static_cast<std::size_t>(w + W)] - abnormal[static_cast<std::size_t>(w)];
        if (n > 0) any_scored = true;
        double nfa = n_tests * std::exp(log_binomial_tail(n, k, stats.p0));
        if (nfa < best.nfa) best = {w, w + W, n, k, nfa};
    }
    det.best = best;
    det.t_start = best.t_start;
    det.t_end = best.t_end;
    det.evidence = best.nfa;
    if (!any_scored)
        det.verdict = Verdict::unscored;
    else
        det.verdict = best.nfa < cfg.epsilon ? Verdict::abnormal : Verdict::normal;
    return det;
}

}  // namespace aistk
