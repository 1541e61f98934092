#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aistk/ais/ingest.hpp"
#include "aistk/ais/tracks_io.hpp"
#include "aistk/anomaly.hpp"
#include "aistk/binio.hpp"
#include "aistk/classifier.hpp"
#include "aistk/configfile.hpp"
#include "aistk/errors.hpp"
#include "aistk/fourhot.hpp"
#include "aistk/geo.hpp"
#include "aistk/parallel.hpp"
#include "aistk/reconstruct.hpp"
#include "aistk/rng.hpp"
#include "aistk/synth/scenario.hpp"
#include "aistk/vrnn/checkpoint.hpp"
#include "aistk/vrnn/score.hpp"
#include "aistk/vrnn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace aistk;

namespace {

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

void require_file(const std::string& path, const char* what) {
    if (path.empty()) return;
    if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

/// Every tunable in one place: config file first, then flag overrides. Unknown
/// sections or keys in the file are rejected.
struct RunConfig {
    RoiConfig roi;
    bool has_roi = false;

    int hidden_dim = 32, latent_dim = 32;
    int epochs = 30, batch_size = 32;
    double lr = 3e-4;

    int score_samples = 50;

    double cell_km = 10.0;
    int min_count = 20;
    double k_sigma = 2.0;

    double epsilon = 1.0;

    int n_particles = 50;
    int confidence_window = 6;

    int cls_epochs = 30, cls_batch = 16;
    double cls_lr = 1e-3;
    int conv1_ch = 16, conv2_ch = 16, kernel_w = 5;

    double split_train = 0.6, split_val = 0.3, split_test = 0.1;

    std::uint64_t seed = 42;
    int threads = 1;
};

RunConfig load_run_config(const std::string& path) {
    RunConfig rc;
    if (path.empty()) return rc;
    require_file(path, "config file");
    ConfigDoc doc = load_config(path);
    for (const ConfigSection& s : doc.sections) {
        if (s.kind == "roi") {
            rc.roi = roi_from_section(s);
            rc.has_roi = true;
        } else if (s.kind == "train") {
            s.check_keys({"hidden_dim", "latent_dim", "epochs", "batch_size", "lr"});
            rc.hidden_dim = s.get_int("hidden_dim", rc.hidden_dim);
            rc.latent_dim = s.get_int("latent_dim", rc.latent_dim);
            rc.epochs = s.get_int("epochs", rc.epochs);
            rc.batch_size = s.get_int("batch_size", rc.batch_size);
            rc.lr = s.get_double("lr", rc.lr);
        } else if (s.kind == "score") {
            s.check_keys({"n_samples"});
            rc.score_samples = s.get_int("n_samples", rc.score_samples);
        } else if (s.kind == "cells") {
            s.check_keys({"cell_km", "min_count", "k_sigma"});
            rc.cell_km = s.get_double("cell_km", rc.cell_km);
            rc.min_count = s.get_int("min_count", rc.min_count);
            rc.k_sigma = s.get_double("k_sigma", rc.k_sigma);
        } else if (s.kind == "detect") {
            s.check_keys({"epsilon"});
            rc.epsilon = s.get_double("epsilon", rc.epsilon);
        } else if (s.kind == "reconstruct") {
            s.check_keys({"n_particles", "confidence_window"});
            rc.n_particles = s.get_int("n_particles", rc.n_particles);
            rc.confidence_window = s.get_int("confidence_window", rc.confidence_window);
        } else if (s.kind == "classify") {
            s.check_keys({"epochs", "batch_size", "lr", "conv1_ch", "conv2_ch", "kernel_w"});
            rc.cls_epochs = s.get_int("epochs", rc.cls_epochs);
            rc.cls_batch = s.get_int("batch_size", rc.cls_batch);
            rc.cls_lr = s.get_double("lr", rc.cls_lr);
            rc.conv1_ch = s.get_int("conv1_ch", rc.conv1_ch);
            rc.conv2_ch = s.get_int("conv2_ch", rc.conv2_ch);
            rc.kernel_w = s.get_int("kernel_w", rc.kernel_w);
        } else if (s.kind == "split") {
            s.check_keys({"train", "val", "test"});
            rc.split_train = s.get_double("train", rc.split_train);
            rc.split_val = s.get_double("val", rc.split_val);
            rc.split_test = s.get_double("test", rc.split_test);
        } else if (s.kind == "run") {
            s.check_keys({"seed", "threads"});
            rc.seed = s.get_u64("seed", rc.seed);
            rc.threads = s.get_int("threads", rc.threads);
        } else {
            throw ConfigError("unknown config section [" + s.label() + "] at line " +
                              std::to_string(s.line));
        }
    }
    if (rc.split_train < 0 || rc.split_val < 0 || rc.split_test < 0 ||
        std::abs(rc.split_train + rc.split_val + rc.split_test - 1.0) > 1e-9)
        throw ConfigError("[split] fractions must be non-negative and sum to 1");
    return rc;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    return os;
}

vrnn::VrnnModel load_model(const std::string& path) {
    require_file(path, "checkpoint");
    return vrnn::load_checkpoint(path);
}

/// Grids tracks and verifies every fix encodes in the model ROI so that the
/// parallel scoring loops cannot fail mid-flight.
std::vector<GridTrack> grid_tracks(const std::vector<Track>& tracks, const RoiConfig& roi) {
    std::vector<GridTrack> out;
    out.reserve(tracks.size());
    for (const Track& tr : tracks) {
        for (const AisMessage& m : tr.messages) {
            try {
                encode(m, roi);
            } catch (const std::exception& e) {
                throw DomainError("track " + tr.id + ": " + e.what());
            }
        }
        out.push_back(to_grid(tr, roi));
    }
    return out;
}

void check_encodable(const std::vector<Track>& tracks, const RoiConfig& roi) {
    for (const Track& tr : tracks)
        for (const AisMessage& m : tr.messages) {
            try {
                encode(m, roi);
            } catch (const std::exception& e) {
                throw DomainError("track " + tr.id + ": " + e.what());
            }
        }
}

std::string num(double v) { return fmt_g17(v); }

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
    std::string scenario, out, seed_str;
};

void run_simulate(const SimulateOpts& o) {
    require_file(o.scenario, "scenario file");
    synth::Scenario sc = synth::load_scenario(o.scenario);
    if (!o.seed_str.empty()) sc.seed = std::stoull(o.seed_str);
    std::vector<Track> tracks = synth::generate(sc);
    auto os = open_out(o.out);
    save_messages(tracks, os);
    std::fprintf(stdout, "simulate: %zu tracks, %lld fixes -> %s\n", tracks.size(),
                 static_cast<long long>([&] {
                     std::int64_t n = 0;
                     for (const auto& t : tracks) n += std::int64_t(t.messages.size());
                     return n;
                 }()),
                 o.out.c_str());
}

// -------------------------------------------------------------- preprocess

struct PreprocessOpts {
    std::string in, config, out_dir, seed_str;
    bool stats = false;
};

void run_preprocess(const PreprocessOpts& o, RunConfig rc) {
    if (!rc.has_roi) throw ConfigError("preprocess needs an [roi] section in the config");
    require_file(o.in, "input CSV");
    if (!o.seed_str.empty()) rc.seed = std::stoull(o.seed_str);

    std::ifstream is(o.in, std::ios::binary);
    if (!is) throw IoError("cannot open input CSV: " + o.in);
    IngestStats st;
    std::vector<AisMessage> msgs = parse_csv(is, &st);
    msgs = validate(std::move(msgs), rc.roi, &st);
    std::vector<Track> tracks = build_tracks(std::move(msgs), {}, &st);
    tracks = remove_stationary(std::move(tracks), 0.1, 0.8, &st);

    // Deterministic shuffle-split on the track level.
    const int n = static_cast<int>(tracks.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(derive_seed(rc.seed, "split"));
    for (int i = n - 1; i > 0; --i)
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
    const int n_train = static_cast<int>(std::llround(rc.split_train * n));
    const int n_val = std::min(n - n_train, static_cast<int>(std::llround(rc.split_val * n)));
    std::vector<int> part(static_cast<std::size_t>(n), 2);
    for (int i = 0; i < n_train; ++i) part[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 0;
    for (int i = n_train; i < n_train + n_val; ++i)
        part[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;

    std::vector<Track> train, val, test;
    for (int i = 0; i < n; ++i) {
        Track& tr = tracks[static_cast<std::size_t>(i)];
        if (part[static_cast<std::size_t>(i)] == 2) {
            test.push_back(std::move(tr));
            continue;
        }
        std::optional<Track> rs = resample_train(tr, rc.roi);
        if (!rs) {
            ++st.tracks_rejected_gap;
            continue;
        }
        if (part[static_cast<std::size_t>(i)] == 0)
            train.push_back(std::move(*rs));
        else
            val.push_back(std::move(*rs));
    }
    st.tracks_emitted = std::int64_t(train.size() + val.size() + test.size());

    fs::create_directories(o.out_dir);
    save_tracks(train, fs::path(o.out_dir) / "tracks_train.csv");
    save_tracks(val, fs::path(o.out_dir) / "tracks_val.csv");
    save_tracks(test, fs::path(o.out_dir) / "tracks_test.csv");

    if (o.stats) {
        std::printf("rows_parsed %lld\n", static_cast<long long>(st.rows_parsed));
        std::printf("rows_malformed %lld\n", static_cast<long long>(st.rows_malformed));
        std::printf("dropped_out_of_roi %lld\n", static_cast<long long>(st.dropped_out_of_roi));
        std::printf("dropped_bad_sog %lld\n", static_cast<long long>(st.dropped_bad_sog));
        std::printf("dropped_bad_cog %lld\n", static_cast<long long>(st.dropped_bad_cog));
        std::printf("dropped_bad_timestamp %lld\n",
                    static_cast<long long>(st.dropped_bad_timestamp));
        std::printf("tracks_built %lld\n", static_cast<long long>(st.tracks_built));
        std::printf("tracks_discarded_short %lld\n",
                    static_cast<long long>(st.tracks_discarded_short));
        std::printf("tracks_dropped_stationary %lld\n",
                    static_cast<long long>(st.tracks_dropped_stationary));
        std::printf("tracks_rejected_gap %lld\n", static_cast<long long>(st.tracks_rejected_gap));
        std::printf("tracks_emitted %lld\n", static_cast<long long>(st.tracks_emitted));
    }
    std::printf("preprocess: %zu train / %zu val / %zu test -> %s\n", train.size(), val.size(),
                test.size(), o.out_dir.c_str());
}

// ------------------------------------------------------------------- train

struct TrainOpts {
    std::string config, train_file, val_file, out, history, seed_str;
    int epochs = -1, batch = -1, hidden = -1, latent = -1, threads = -1;
    double lr = std::numeric_limits<double>::quiet_NaN();
};

std::vector<std::vector<FourHotVector>> encode_regular(const std::vector<Track>& tracks,
                                                       const RoiConfig& roi) {
    std::vector<std::vector<FourHotVector>> seqs;
    seqs.reserve(tracks.size());
    for (const Track& tr : tracks) {
        GridTrack g = grid_from_regular(tr, roi);
        std::vector<FourHotVector> seq;
        seq.reserve(g.slots.size());
        for (const auto& slot : g.slots) {
            if (!slot)
                throw FormatError("track " + tr.id +
                                  " has gaps; train expects the resampled artifact");
            seq.push_back(encode(*slot, roi));
        }
        seqs.push_back(std::move(seq));
    }
    return seqs;
}

void run_train(const TrainOpts& o, RunConfig rc) {
    if (!rc.has_roi) throw ConfigError("train needs an [roi] section in the config");
    require_file(o.train_file, "training tracks");
    require_file(o.val_file, "validation tracks");
    if (!o.seed_str.empty()) rc.seed = std::stoull(o.seed_str);
    if (o.epochs >= 0) rc.epochs = o.epochs;
    if (o.batch > 0) rc.batch_size = o.batch;
    if (o.hidden > 0) rc.hidden_dim = o.hidden;
    if (o.latent > 0) rc.latent_dim = o.latent;
    if (o.threads > 0) rc.threads = o.threads;
    if (!std::isnan(o.lr)) rc.lr = o.lr;

    std::vector<Track> train = load_tracks(fs::path(o.train_file));
    std::vector<Track> val = load_tracks(fs::path(o.val_file));
    auto train_seqs = encode_regular(train, rc.roi);
    auto val_seqs = encode_regular(val, rc.roi);

    vrnn::VrnnConfig mc;
    mc.roi = rc.roi;
    mc.hidden_dim = rc.hidden_dim;
    mc.latent_dim = rc.latent_dim;
    Rng init(derive_seed(rc.seed, "init"));
    vrnn::VrnnModel model = vrnn::VrnnModel::create(mc, init);

    vrnn::TrainConfig tc;
    tc.epochs = rc.epochs;
    tc.batch_size = rc.batch_size;
    tc.lr = rc.lr;
    tc.seed = derive_seed(rc.seed, "train");
    tc.threads = rc.threads;
    vrnn::TrainHistory hist = vrnn::vrnn_train(model, train_seqs, val_seqs, tc);

    vrnn::save_checkpoint(model, o.out);
    if (!o.history.empty()) {
        auto os = open_out(o.history);
        os << "epoch,train_elbo,val_elbo\n";
        for (const auto& row : hist.rows)
            os << row.epoch << ',' << num(row.train_elbo) << ',' << num(row.val_elbo) << "\n";
    }
    std::printf("train: %zu tracks, %d epochs -> %s (final val elbo/step %s)\n",
                train_seqs.size(), rc.epochs, o.out.c_str(),
                hist.rows.empty() ? "n/a" : num(hist.rows.back().val_elbo).c_str());
}

// ------------------------------------------------------------------- score

struct ScoreOpts {
    std::string checkpoint, in, out, config, seed_str;
    int samples = -1, threads = -1;
};

void run_score(const ScoreOpts& o, RunConfig rc) {
    vrnn::VrnnModel model = load_model(o.checkpoint);
    require_file(o.in, "input tracks");
    if (!o.seed_str.empty()) rc.seed = std::stoull(o.seed_str);
    if (o.samples > 0) rc.score_samples = o.samples;
    if (o.threads > 0) rc.threads = o.threads;

    std::vector<Track> tracks = load_tracks(fs::path(o.in));
    std::vector<GridTrack> grids = grid_tracks(tracks, model.cfg.roi);

    vrnn::ScoreConfig sc;
    sc.n_samples = rc.score_samples;
    sc.seed = derive_seed(rc.seed, "score");
    std::vector<std::vector<vrnn::StepScore>> rows(grids.size());
    parallel_for(static_cast<int>(grids.size()), rc.threads, [&](int i) {
        rows[static_cast<std::size_t>(i)] =
            vrnn::stepwise_loglik(model, grids[static_cast<std::size_t>(i)], sc);
    });

    auto os = open_out(o.out);
    os << "track_id,slot,timestamp,observed,logp\n";
    for (std::size_t i = 0; i < grids.size(); ++i)
        for (const auto& s : rows[i])
            os << grids[i].id << ',' << s.slot << ',' << s.timestamp << ',' << (s.observed ? 1 : 0)
               << ',' << num(s.logp) << "\n";
    std::printf("score: %zu tracks -> %s\n", grids.size(), o.out.c_str());
}

// --------------------------------------------------------------- fit-cells

struct FitCellsOpts {
    std::string checkpoint, val, out, config, seed_str;
    int threads = -1;
};

void run_fit_cells(const FitCellsOpts& o, RunConfig rc) {
    vrnn::VrnnModel model = load_model(o.checkpoint);
    require_file(o.val, "validation tracks");
    if (!o.seed_str.empty()) rc.seed = std::stoull(o.seed_str);
    if (o.threads > 0) rc.threads = o.threads;

    std::vector<Track> tracks = load_tracks(fs::path(o.val));
    std::vector<GridTrack> grids = grid_tracks(tracks, model.cfg.roi);

    FitCellsConfig fc;
    fc.cell_km = rc.cell_km;
    fc.min_count = rc.min_count;
    fc.k_sigma = rc.k_sigma;
    fc.score.n_samples = rc.score_samples;
    fc.score.seed = derive_seed(rc.seed, "score");
    fc.threads = rc.threads;
    CellStats stats = fit_cells(model, grids, fc);
    save_cells(stats, o.out);
    std::printf("fit-cells: %zu cells, p0 %s, global threshold %s -> %s\n", stats.cells.size(),
                num(stats.p0).c_str(), num(stats.global_threshold).c_str(), o.out.c_str());
}

// ------------------------------------------------------------------ detect

struct DetectOpts {
    std::string checkpoint, cells, in, out, geojson, config, seed_str;
    int threads = -1;
    bool steps = false;
};

ordered_json track_geojson_feature(const GridTrack& g, const ordered_json& props) {
    ordered_json coords = ordered_json::array();
    for (const auto& slot : g.slots)
        if (slot) coords.push_back({slot->lon, slot->lat});
    ordered_json f;
    f["type"] = "Feature";
    f["geometry"] = {{"type", "LineString"}, {"coordinates", coords}};
    f["properties"] = props;
    return f;
}

void run_detect(const DetectOpts& o, RunConfig rc) {
    vrnn::VrnnModel model = load_model(o.checkpoint);
    require_file(o.cells, "cell statistics");
    require_file(o.in, "input tracks");
    if (!o.seed_str.empty()) rc.seed = std::stoull(o.seed_str);
    if (o.threads > 0) rc.threads = o.threads;

    CellStats stats = load_cells(o.cells);
    std::vector<Track> tracks = load_tracks(fs::path(o.in));
    std::vector<GridTrack> grids = grid_tracks(tracks, model.cfg.roi);

    // The a contrario test count spans every window of this input set.
    std::int64_t n_tests = 0;
    for (const GridTrack& g : grids) {
        const int t = static_cast<int>(g.slots.size());
        const int w = std::min(std::max(1, 14400 / model.cfg.roi.dt), t);
        n_tests += std::max(1, t - w + 1);
    }

    ContrarioConfig cc;
    cc.k_sigma = stats.k_sigma;
    cc.epsilon = rc.epsilon;
    cc.n_tests = n_tests;
    cc.score.n_samples = rc.score_samples;
    cc.score.seed = derive_seed(rc.seed, "score");

    std::vector<Detection> contrario(grids.size()), global(grids.size());
    parallel_for(static_cast<int>(grids.size()), rc.threads, [&](int i) {
        const GridTrack& g = grids[static_cast<std::size_t>(i)];
        contrario[static_cast<std::size_t>(i)] = detect_contrario(model, stats, g, cc);
        global[static_cast<std::size_t>(i)] =
            detect_global(model, g, stats.global_threshold, cc.score);
    });

    auto os = open_out(o.out);
    for (std::size_t i = 0; i < grids.size(); ++i) {
        const Detection& dc = contrario[i];
        const Detection& dg = global[i];
        ordered_json j;
        j["track_id"] = grids[i].id;
        j["anomaly"] = grids[i].anomaly;
        j["contrario"] = {{"verdict", verdict_name(dc.verdict)},
                          {"nfa", dc.evidence},
                          {"t_start", dc.best.t_start},
                          {"t_end", dc.best.t_end},
                          {"n", dc.best.n},
                          {"k", dc.best.k}};
        j["global"] = {{"verdict", verdict_name(dg.verdict)},
                       {"mean_logp", dg.evidence},
                       {"threshold", stats.global_threshold}};
        if (o.steps) {
            ordered_json steps = ordered_json::array();
            for (const StepVerdict& s : dc.steps)
                steps.push_back({{"slot", s.slot},
                                 {"logp", s.logp},
                                 {"flag", step_flag_name(s.flag)}});
            j["steps"] = steps;
        }
        os << j.dump() << "\n";
    }

    if (!o.geojson.empty()) {
        ordered_json features = ordered_json::array();
        for (std::size_t i = 0; i < grids.size(); ++i) {
            ordered_json props;
            props["track_id"] = grids[i].id;
            props["verdict"] = verdict_name(contrario[i].verdict);
            props["nfa"] = contrario[i].evidence;
            props["global_verdict"] = verdict_name(global[i].verdict);
            props["anomaly"] = grids[i].anomaly;
            features.push_back(track_geojson_feature(grids[i], props));
        }
        ordered_json fc;
        fc["type"] = "FeatureCollection";
        fc["features"] = features;
        auto gs = open_out(o.geojson);
        gs << fc.dump(2) << "\n";
    }

    std::size_t flagged = 0;
    for (const Detection& d : contrario) flagged += d.verdict == Verdict::abnormal ? 1 : 0;
    std::printf("detect: %zu tracks, %zu abnormal -> %s\n", grids.size(), flagged, o.out.c_str());
}

// ------------------------------------------------------------- reconstruct

struct ReconstructOpts {
    std::string checkpoint, in, out, cells, truth, config, seed_str;
    int gap_start = -1, gap_len = 0, particles = -1, window = -1, samples = -1, threads = -1;
    double tau = std::numeric_limits<double>::quiet_NaN();
};

void run_reconstruct(const ReconstructOpts& o, RunConfig rc) {
    vrnn::VrnnModel model = load_model(o.checkpoint);
    require_file(o.in, "input tracks");
    if ((o.gap_start >= 0) != (o.gap_len > 0))
        throw UsageError("--gap-start and --gap-len must be given together");
    if (!o.seed_str.empty()) rc.seed = std::stoull(o.seed_str);
    if (o.particles > 0) rc.n_particles = o.particles;
    if (o.window > 0) rc.confidence_window = o.window;
    if (o.samples > 0) rc.score_samples = o.samples;
    if (o.threads > 0) rc.threads = o.threads;

    ReconstructConfig cfg;
    cfg.n_particles = rc.n_particles;
    cfg.seed = rc.seed;
    cfg.confidence_window = rc.confidence_window;
    cfg.score_samples = rc.score_samples;
    if (!std::isnan(o.tau)) {
        cfg.tau = o.tau;
    } else if (!o.cells.empty()) {
        require_file(o.cells, "cell statistics");
        cfg.tau = load_cells(o.cells).loglik_p10;
    }

    std::vector<Track> tracks = load_tracks(fs::path(o.in));
    std::vector<GridTrack> grids = grid_tracks(tracks, model.cfg.roi);

    std::map<std::string, GridTrack> truth;
    if (!o.truth.empty()) {
        require_file(o.truth, "truth tracks");
        for (GridTrack& g : grid_tracks(load_tracks(fs::path(o.truth)), model.cfg.roi))
            truth.emplace(g.id, std::move(g));
    }
    if (o.gap_start >= 0)
        for (GridTrack& g : grids) {
            truth.insert_or_assign(g.id, g);
            const int end = std::min<int>(o.gap_start + o.gap_len,
                                          static_cast<int>(g.slots.size()));
            for (int s = o.gap_start; s < end; ++s) g.slots[static_cast<std::size_t>(s)].reset();
        }

    std::vector<Reconstruction> recs(grids.size());
    parallel_for(static_cast<int>(grids.size()), rc.threads, [&](int i) {
        recs[static_cast<std::size_t>(i)] =
            reconstruct_track(model, grids[static_cast<std::size_t>(i)], cfg);
    });

    const bool with_err = !truth.empty();
    auto os = open_out(o.out);
    os << "track_id,slot,timestamp,lat,lon,sog,cog,method";
    if (with_err) os << ",err_km";
    os << "\n";
    for (std::size_t i = 0; i < grids.size(); ++i) {
        const GridTrack* tg = nullptr;
        if (with_err) {
            auto it = truth.find(grids[i].id);
            tg = it == truth.end() ? nullptr : &it->second;
        }
        LocalFrame frame(model.cfg.roi.lat_center());
        for (const FilledStep& s : recs[i].steps) {
            os << grids[i].id << ',' << s.slot << ',' << s.timestamp << ',' << num(s.kin.lat)
               << ',' << num(s.kin.lon) << ',' << num(s.kin.sog) << ',' << num(s.kin.cog) << ','
               << fill_method_name(s.method);
            if (with_err) {
                os << ',';
                if (tg && s.slot < static_cast<int>(tg->slots.size()) &&
                    tg->slots[static_cast<std::size_t>(s.slot)]) {
                    const AisMessage& t = *tg->slots[static_cast<std::size_t>(s.slot)];
                    os << num(frame.distance_km(s.kin.lat, s.kin.lon, t.lat, t.lon));
                }
            }
            os << "\n";
        }
    }
    std::printf("reconstruct: %zu tracks -> %s\n", grids.size(), o.out.c_str());
}

// ---------------------------------------------------------- classify-train

struct ClassifyTrainOpts {
    std::string checkpoint, train_file, val_file, out, history, config, seed_str;
    int epochs = -1, batch = -1, threads = -1;
    double lr = std::numeric_limits<double>::quiet_NaN();
};

void run_classify_train(const ClassifyTrainOpts& o, RunConfig rc) {
    vrnn::VrnnModel model = load_model(o.checkpoint);
    require_file(o.train_file, "training tracks");
    if (!o.seed_str.empty()) rc.seed = std::stoull(o.seed_str);
    if (o.epochs >= 0) rc.cls_epochs = o.epochs;
    if (o.batch > 0) rc.cls_batch = o.batch;
    if (!std::isnan(o.lr)) rc.cls_lr = o.lr;
    if (o.threads > 0) rc.threads = o.threads;

    // Only cargo/passenger/tanker/tug tracks are trainable; background
    // traffic and unlabeled tracks are skipped, not an error.
    auto labeled_only = [](std::vector<Track> in, std::size_t* skipped) {
        std::vector<Track> out;
        for (Track& tr : in) {
            auto lb = tr.label();
            if (lb && *lb != VesselType::other)
                out.push_back(std::move(tr));
            else
                ++*skipped;
        }
        return out;
    };
    std::size_t skipped = 0;
    std::vector<Track> train = labeled_only(load_tracks(fs::path(o.train_file)), &skipped);
    check_encodable(train, model.cfg.roi);
    std::vector<RegimeMatrix> train_m = build_matrices(model, train, rc.threads);
    std::vector<RegimeMatrix> val_m;
    if (!o.val_file.empty()) {
        require_file(o.val_file, "validation tracks");
        std::vector<Track> val = labeled_only(load_tracks(fs::path(o.val_file)), &skipped);
        check_encodable(val, model.cfg.roi);
        val_m = build_matrices(model, val, rc.threads);
    }
    if (skipped > 0)
        std::printf("classify-train: skipped %zu tracks without a usable label\n", skipped);

    CnnConfig cc;
    cc.in_rows = model.hidden() + model.latent();
    cc.conv1_ch = rc.conv1_ch;
    cc.conv2_ch = rc.conv2_ch;
    cc.kernel_w = rc.kernel_w;
    Rng init(derive_seed(rc.seed, "classify/init"));
    CnnModel cnn = CnnModel::create(cc, init);

    ClassifierTrainConfig tc;
    tc.epochs = rc.cls_epochs;
    tc.batch_size = rc.cls_batch;
    tc.lr = rc.cls_lr;
    tc.seed = derive_seed(rc.seed, "classify");
    tc.threads = rc.threads;
    ClassifierHistory hist = train_classifier(cnn, train_m, val_m, tc);

    save_classifier(cnn, o.out);
    if (!o.history.empty()) {
        auto os = open_out(o.history);
        os << "epoch,train_loss,train_acc,val_acc\n";
        for (const auto& row : hist.epochs)
            os << row.epoch << ',' << num(row.train_loss) << ',' << num(row.train_acc) << ','
               << num(row.val_acc) << "\n";
    }
    std::printf("classify-train: %zu matrices, %d epochs -> %s (final val acc %s)\n",
                train_m.size(), rc.cls_epochs, o.out.c_str(),
                hist.epochs.empty() ? "n/a" : num(hist.epochs.back().val_acc).c_str());
}

// ---------------------------------------------------------------- classify

struct ClassifyOpts {
    std::string checkpoint, classifier, in, out, config;
    int threads = -1;
};

void run_classify(const ClassifyOpts& o, RunConfig rc) {
    vrnn::VrnnModel model = load_model(o.checkpoint);
    require_file(o.classifier, "classifier checkpoint");
    require_file(o.in, "input tracks");
    if (o.threads > 0) rc.threads = o.threads;
    CnnModel cnn = load_classifier(o.classifier);

    std::vector<Track> tracks = load_tracks(fs::path(o.in));
    check_encodable(tracks, model.cfg.roi);
    std::vector<RegimeMatrix> ms = build_matrices(model, tracks, rc.threads);

    std::vector<Prediction> preds(ms.size());
    parallel_for(static_cast<int>(ms.size()), rc.threads, [&](int i) {
        preds[static_cast<std::size_t>(i)] = predict(cnn, ms[static_cast<std::size_t>(i)]);
    });

    auto os = open_out(o.out);
    os << "track_id,predicted,prob_cargo,prob_passenger,prob_tanker,prob_tug\n";
    for (std::size_t i = 0; i < ms.size(); ++i) {
        os << ms[i].track_id << ',' << vessel_type_name(preds[i].type);
        for (double p : preds[i].prob) os << ',' << num(p);
        os << "\n";
    }
    std::printf("classify: %zu matrices -> %s\n", ms.size(), o.out.c_str());
}

// -------------------------------------------------------------- export-map

struct ExportMapOpts {
    std::string cells, out_grid, out_cells_geojson;
    std::string detections, tracks, out_tracks_geojson;
    std::string image_tracks, out_image, config;
};

void run_export_map(const ExportMapOpts& o, const RunConfig& rc) {
    const bool grid = !o.out_grid.empty();
    const bool cells_gj = !o.out_cells_geojson.empty();
    const bool tracks_gj = !o.out_tracks_geojson.empty();
    const bool image = !o.out_image.empty();
    if (!grid && !cells_gj && !tracks_gj && !image)
        throw UsageError("export-map: nothing to do; pass at least one --out-* option");

    if (grid || cells_gj) {
        if (o.cells.empty()) throw UsageError("--cells is required for grid/cell exports");
        require_file(o.cells, "cell statistics");
        CellStats stats = load_cells(o.cells);
        LocalFrame frame(stats.origin_lat);
        auto cell_box = [&](int i, int j) {
            double lat0 = stats.origin_lat + frame.km_to_dlat(i * stats.cell_km);
            double lat1 = stats.origin_lat + frame.km_to_dlat((i + 1) * stats.cell_km);
            double lon0 = stats.origin_lon + frame.km_to_dlon(j * stats.cell_km);
            double lon1 = stats.origin_lon + frame.km_to_dlon((j + 1) * stats.cell_km);
            return std::array<double, 4>{lat0, lon0, lat1, lon1};
        };
        if (grid) {
            auto os = open_out(o.out_grid);
            os << "# origin_lat " << num(stats.origin_lat) << "\n";
            os << "# origin_lon " << num(stats.origin_lon) << "\n";
            os << "# cell_km " << num(stats.cell_km) << "\n";
            os << "cell_i,cell_j,lat_south,lon_west,lat_north,lon_east,mean,std,count\n";
            for (const auto& [key, cell] : stats.cells) {
                auto b = cell_box(key.first, key.second);
                os << key.first << ',' << key.second << ',' << num(b[0]) << ',' << num(b[1])
                   << ',' << num(b[2]) << ',' << num(b[3]) << ',' << num(cell.mean) << ','
                   << num(cell.std) << ',' << cell.count << "\n";
            }
        }
        if (cells_gj) {
            ordered_json features = ordered_json::array();
            for (const auto& [key, cell] : stats.cells) {
                auto b = cell_box(key.first, key.second);
                ordered_json ring = ordered_json::array(
                    {{b[1], b[0]}, {b[3], b[0]}, {b[3], b[2]}, {b[1], b[2]}, {b[1], b[0]}});
                ordered_json f;
                f["type"] = "Feature";
                f["geometry"] = {{"type", "Polygon"},
                                 {"coordinates", ordered_json::array({ring})}};
                f["properties"] = {{"cell_i", key.first},
                                   {"cell_j", key.second},
                                   {"mean", cell.mean},
                                   {"std", cell.std},
                                   {"count", cell.count},
                                   {"scoreable", stats.scoreable(cell)}};
                features.push_back(f);
            }
            ordered_json fc;
            fc["type"] = "FeatureCollection";
            fc["features"] = features;
            auto os = open_out(o.out_cells_geojson);
            os << fc.dump(2) << "\n";
        }
    }

    if (tracks_gj) {
        if (o.detections.empty() || o.tracks.empty())
            throw UsageError("--detections and --tracks are required for the track export");
        require_file(o.detections, "detections file");
        require_file(o.tracks, "tracks file");
        std::map<std::string, ordered_json> by_id;
        std::ifstream is(o.detections, std::ios::binary);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            ordered_json j = ordered_json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("track_id"))
                throw FormatError("detections line " + std::to_string(lineno) +
                                  " is not a detection object");
            by_id[j["track_id"].get<std::string>()] = j;
        }
        std::vector<Track> tracks = load_tracks(fs::path(o.tracks));
        ordered_json features = ordered_json::array();
        for (const Track& tr : tracks) {
            auto it = by_id.find(tr.id);
            ordered_json coords = ordered_json::array();
            for (const AisMessage& m : tr.messages) coords.push_back({m.lon, m.lat});
            ordered_json f;
            f["type"] = "Feature";
            f["geometry"] = {{"type", "LineString"}, {"coordinates", coords}};
            ordered_json props;
            props["track_id"] = tr.id;
            props["anomaly"] = tr.anomaly;
            if (it != by_id.end()) {
                props["verdict"] = it->second["contrario"]["verdict"];
                props["nfa"] = it->second["contrario"]["nfa"];
                props["global_verdict"] = it->second["global"]["verdict"];
            } else {
                props["verdict"] = "unscored";
            }
            f["properties"] = props;
            features.push_back(f);
        }
        ordered_json fc;
        fc["type"] = "FeatureCollection";
        fc["features"] = features;
        auto os = open_out(o.out_tracks_geojson);
        os << fc.dump(2) << "\n";
    }

    if (image) {
        if (o.image_tracks.empty())
            throw UsageError("--image-tracks is required for the image export");
        if (!rc.has_roi) throw ConfigError("export-map image needs an [roi] config section");
        require_file(o.image_tracks, "image tracks");
        std::vector<Track> tracks = load_tracks(fs::path(o.image_tracks));
        Tensor total = Tensor::zeros({rc.roi.lat_bins, rc.roi.lon_bins});
        for (const Track& tr : tracks) {
            std::vector<FourHotVector> enc;
            for (const AisMessage& m : tr.messages) {
                try {
                    enc.push_back(encode(m, rc.roi));
                } catch (const DomainError&) {
                }
            }
            Tensor img = accumulate_image(enc, rc.roi);
            for (std::int64_t i = 0; i < img.size(); ++i) total[i] += img[i];
        }
        auto os = open_out(o.out_image);
        os << "# lat_bins " << rc.roi.lat_bins << "\n";
        os << "# lon_bins " << rc.roi.lon_bins << "\n";
        for (int i = 0; i < rc.roi.lat_bins; ++i) {
            for (int j = 0; j < rc.roi.lon_bins; ++j)
                os << (j ? "," : "") << num(total.at(i, j));
            os << "\n";
        }
    }
    std::printf("export-map: done\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AIS track toolkit: simulation, embedding, reconstruction, detection, "
                 "classification"};
    app.require_subcommand(1);

    SimulateOpts sim;
    auto* s_sim = app.add_subcommand("simulate", "Generate synthetic AIS traffic from a scenario");
    s_sim->add_option("--scenario", sim.scenario, "scenario config file")->required();
    s_sim->add_option("--out", sim.out, "output messages CSV")->required();
    s_sim->add_option("--seed", sim.seed_str, "override the scenario seed");

    PreprocessOpts pre;
    auto* s_pre = app.add_subcommand("preprocess", "Validate, build tracks and split the data");
    s_pre->add_option("--in", pre.in, "input messages CSV")->required();
    s_pre->add_option("--config", pre.config, "run config with an [roi] section")->required();
    s_pre->add_option("--out-dir", pre.out_dir, "output directory")->required();
    s_pre->add_option("--seed", pre.seed_str, "override the run seed");
    s_pre->add_flag("--stats", pre.stats, "print ingest counters");

    TrainOpts tr;
    auto* s_tr = app.add_subcommand("train", "Train the trajectory embedding");
    s_tr->add_option("--config", tr.config, "run config")->required();
    s_tr->add_option("--train", tr.train_file, "resampled training tracks CSV")->required();
    s_tr->add_option("--val", tr.val_file, "resampled validation tracks CSV")->required();
    s_tr->add_option("--out", tr.out, "output checkpoint")->required();
    s_tr->add_option("--history", tr.history, "training history CSV");
    s_tr->add_option("--epochs", tr.epochs, "override epochs");
    s_tr->add_option("--batch-size", tr.batch, "override batch size");
    s_tr->add_option("--lr", tr.lr, "override learning rate");
    s_tr->add_option("--hidden", tr.hidden, "override hidden dimension");
    s_tr->add_option("--latent", tr.latent, "override latent dimension");
    s_tr->add_option("--seed", tr.seed_str, "override the run seed");
    s_tr->add_option("--threads", tr.threads, "worker threads");

    ScoreOpts sco;
    auto* s_sco = app.add_subcommand("score", "Stepwise log-likelihoods for tracks");
    s_sco->add_option("--checkpoint", sco.checkpoint, "embedding checkpoint")->required();
    s_sco->add_option("--in", sco.in, "input tracks CSV")->required();
    s_sco->add_option("--out", sco.out, "output scores CSV")->required();
    s_sco->add_option("--config", sco.config, "run config");
    s_sco->add_option("--samples", sco.samples, "particles per step");
    s_sco->add_option("--seed", sco.seed_str, "override the run seed");
    s_sco->add_option("--threads", sco.threads, "worker threads");

    FitCellsOpts fit;
    auto* s_fit = app.add_subcommand("fit-cells", "Calibrate per-cell score statistics");
    s_fit->add_option("--checkpoint", fit.checkpoint, "embedding checkpoint")->required();
    s_fit->add_option("--val", fit.val, "validation tracks CSV")->required();
    s_fit->add_option("--out", fit.out, "output cell statistics CSV")->required();
    s_fit->add_option("--config", fit.config, "run config");
    s_fit->add_option("--seed", fit.seed_str, "override the run seed");
    s_fit->add_option("--threads", fit.threads, "worker threads");

    DetectOpts det;
    auto* s_det = app.add_subcommand("detect", "Flag abnormal tracks");
    s_det->add_option("--checkpoint", det.checkpoint, "embedding checkpoint")->required();
    s_det->add_option("--cells", det.cells, "cell statistics CSV")->required();
    s_det->add_option("--in", det.in, "input tracks CSV")->required();
    s_det->add_option("--out", det.out, "output detections JSONL")->required();
    s_det->add_option("--geojson", det.geojson, "also write track GeoJSON");
    s_det->add_option("--config", det.config, "run config");
    s_det->add_option("--seed", det.seed_str, "override the run seed");
    s_det->add_option("--threads", det.threads, "worker threads");
    s_det->add_flag("--steps", det.steps, "include per-step flags in the JSONL");

    ReconstructOpts rec;
    auto* s_rec = app.add_subcommand("reconstruct", "Fill track gaps");
    s_rec->add_option("--checkpoint", rec.checkpoint, "embedding checkpoint")->required();
    s_rec->add_option("--in", rec.in, "input tracks CSV")->required();
    s_rec->add_option("--out", rec.out, "output filled CSV")->required();
    s_rec->add_option("--gap-start", rec.gap_start, "punch a gap starting at this slot");
    s_rec->add_option("--gap-len", rec.gap_len, "punched gap length in slots");
    s_rec->add_option("--cells", rec.cells, "cell statistics (confidence threshold source)");
    s_rec->add_option("--tau", rec.tau, "explicit confidence threshold");
    s_rec->add_option("--truth", rec.truth, "ground-truth tracks CSV for per-step error");
    s_rec->add_option("--particles", rec.particles, "particle count");
    s_rec->add_option("--window", rec.window, "confidence window");
    s_rec->add_option("--samples", rec.samples, "confidence scoring particles");
    s_rec->add_option("--config", rec.config, "run config");
    s_rec->add_option("--seed", rec.seed_str, "override the run seed");
    s_rec->add_option("--threads", rec.threads, "worker threads");

    ClassifyTrainOpts ctr;
    auto* s_ctr = app.add_subcommand("classify-train", "Train the vessel-type classifier");
    s_ctr->add_option("--checkpoint", ctr.checkpoint, "embedding checkpoint")->required();
    s_ctr->add_option("--train", ctr.train_file, "labeled training tracks CSV")->required();
    s_ctr->add_option("--val", ctr.val_file, "labeled validation tracks CSV");
    s_ctr->add_option("--out", ctr.out, "output classifier checkpoint")->required();
    s_ctr->add_option("--history", ctr.history, "training history CSV");
    s_ctr->add_option("--epochs", ctr.epochs, "override epochs");
    s_ctr->add_option("--batch-size", ctr.batch, "override batch size");
    s_ctr->add_option("--lr", ctr.lr, "override learning rate");
    s_ctr->add_option("--config", ctr.config, "run config");
    s_ctr->add_option("--seed", ctr.seed_str, "override the run seed");
    s_ctr->add_option("--threads", ctr.threads, "worker threads");

    ClassifyOpts cls;
    auto* s_cls = app.add_subcommand("classify", "Predict vessel types");
    s_cls->add_option("--checkpoint", cls.checkpoint, "embedding checkpoint")->required();
    s_cls->add_option("--classifier", cls.classifier, "classifier checkpoint")->required();
    s_cls->add_option("--in", cls.in, "input tracks CSV")->required();
    s_cls->add_option("--out", cls.out, "output predictions CSV")->required();
    s_cls->add_option("--config", cls.config, "run config");
    s_cls->add_option("--threads", cls.threads, "worker threads");

    ExportMapOpts exp;
    auto* s_exp = app.add_subcommand("export-map", "Render statistics and detections for maps");
    s_exp->add_option("--cells", exp.cells, "cell statistics CSV");
    s_exp->add_option("--out-grid", exp.out_grid, "cell grid CSV with geometry");
    s_exp->add_option("--out-cells-geojson", exp.out_cells_geojson, "cell polygons GeoJSON");
    s_exp->add_option("--detections", exp.detections, "detections JSONL");
    s_exp->add_option("--tracks", exp.tracks, "tracks CSV matching the detections");
    s_exp->add_option("--out-tracks-geojson", exp.out_tracks_geojson, "track GeoJSON");
    s_exp->add_option("--image-tracks", exp.image_tracks, "tracks CSV for the density image");
    s_exp->add_option("--out-image", exp.out_image, "lat x lon visit-count CSV");
    s_exp->add_option("--config", exp.config, "run config (ROI for the image export)");

    s_sim->callback([&] { run_simulate(sim); });
    s_pre->callback([&] { run_preprocess(pre, load_run_config(pre.config)); });
    s_tr->callback([&] { run_train(tr, load_run_config(tr.config)); });
    s_sco->callback([&] { run_score(sco, load_run_config(sco.config)); });
    s_fit->callback([&] { run_fit_cells(fit, load_run_config(fit.config)); });
    s_det->callback([&] { run_detect(det, load_run_config(det.config)); });
    s_rec->callback([&] { run_reconstruct(rec, load_run_config(rec.config)); });
    s_ctr->callback([&] { run_classify_train(ctr, load_run_config(ctr.config)); });
    s_cls->callback([&] { run_classify(cls, load_run_config(cls.config)); });
    s_exp->callback([&] { run_export_map(exp, load_run_config(exp.config)); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "aistk: usage error: %s\n", e.what());
        return 2;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "aistk: usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "aistk: error: %s\n", e.what());
        return 1;
    }
    return 0;
}
