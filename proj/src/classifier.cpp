#include "aistk/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "aistk/ais/ingest.hpp"
#include "aistk/nn/adam.hpp"
#include "aistk/binio.hpp"
#include "aistk/errors.hpp"
#include "aistk/parallel.hpp"
#include "aistk/vrnn/score.hpp"

namespace aistk {

namespace {

constexpr const char* kMagic = "AISTK-CNN-CHECKPOINT 1";
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<double> softmax(std::span<const double> logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

int argmax_index(std::span<const double> v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct FwdCache {
    nn::Conv2dCache c1, c2;
    nn::MaxPoolCache mp;
    Tensor a1, p1, a2;
    std::vector<double> gap;
    nn::DenseCache hd;
};

std::vector<double> logits_of(const CnnModel& m, const RegimeMatrix& rm, FwdCache& fc) {
    if (rm.m.ndim() != 2 || rm.m.shape[0] != m.cfg.in_rows || rm.m.shape[1] != kDayCols)
        throw ShapeError("classifier input is " + rm.m.shape_str() + ", model expects [" +
                         std::to_string(m.cfg.in_rows) + " x " + std::to_string(kDayCols) + "]");
    Tensor x({1, rm.m.shape[0], rm.m.shape[1]}, rm.m.data);
    fc.a1 = m.conv1.forward(x, fc.c1);
    fc.p1 = nn::maxpool_last(fc.a1, 2, fc.mp);
    fc.a2 = m.conv2.forward(fc.p1, fc.c2);
    const int oc = fc.a2.shape[0];
    const int ow = fc.a2.shape[2];
    fc.gap.assign(static_cast<std::size_t>(oc), 0.0);
    for (int ch = 0; ch < oc; ++ch) {
        double s = 0.0;
        for (int w = 0; w < ow; ++w) s += fc.a2[static_cast<std::int64_t>(ch) * ow + w];
        fc.gap[static_cast<std::size_t>(ch)] = s / ow;
    }
    return m.head.forward(fc.gap, fc.hd);
}

struct CnnGrads {
    nn::Conv2d::Grads conv1, conv2;
    nn::Dense::Grads head;
    explicit CnnGrads(const CnnModel& m) : conv1(m.conv1), conv2(m.conv2), head(m.head) {}
};

void backward_sample(const CnnModel& m, const FwdCache& fc, std::span<const double> dlogits,
                     CnnGrads& g) {
    std::vector<double> dgap(fc.gap.size(), 0.0);
    m.head.backward(dlogits, fc.hd, g.head, dgap);
    const int oc = fc.a2.shape[0];
    const int ow = fc.a2.shape[2];
    Tensor da2(fc.a2.shape);
    for (int ch = 0; ch < oc; ++ch)
        for (int w = 0; w < ow; ++w)
            da2[static_cast<std::int64_t>(ch) * ow + w] = dgap[static_cast<std::size_t>(ch)] / ow;
    Tensor dp1(fc.p1.shape);
    m.conv2.backward(da2, fc.c2, g.conv2, &dp1);
    Tensor da1(fc.a1.shape);
    nn::maxpool_last_backward(dp1, fc.mp, da1);
    m.conv1.backward(da1, fc.c1, g.conv1, nullptr);
}

int class_of(const RegimeMatrix& rm) {
    if (!rm.label || static_cast<int>(*rm.label) >= kNumClasses)
        throw ConfigError("matrix " + rm.track_id +
                          " lacks a cargo/passenger/tanker/tug label");
    return static_cast<int>(*rm.label);
}

Track day_piece(const Track& track, std::size_t begin, std::size_t end, int day, bool split) {
    Track piece;
    piece.mmsi = track.mmsi;
    piece.id = split ? track.id + "/d" + std::to_string(day) : track.id;
    piece.anomaly = track.anomaly;
    piece.messages.assign(track.messages.begin() + static_cast<std::ptrdiff_t>(begin),
                          track.messages.begin() + static_cast<std::ptrdiff_t>(end));
    return piece;
}

}  // namespace

RegimeMatrix build_matrix(const vrnn::VrnnModel& model, const Track& track) {
    if (track.messages.empty()) throw DomainError("build_matrix: empty track " + track.id);
    if (track.duration_s() > 24 * 3600)
        throw DomainError("build_matrix: track " + track.id + " spans more than 24h");

    GridTrack grid = to_grid(track, model.cfg.roi);
    std::vector<vrnn::Regime> regs = vrnn::regimes(model, grid);
    const int h = model.hidden();
    const int z = model.latent();
    const int rows = h + z;

    RegimeMatrix out;
    out.track_id = track.id;
    out.label = track.label();
    out.m = Tensor::zeros({rows, kDayCols});
    const int have = static_cast<int>(regs.size());
    for (int col = 0; col < kDayCols; ++col) {
        const vrnn::Regime& r = regs[static_cast<std::size_t>(std::min(col, have - 1))];
        for (int i = 0; i < h; ++i) out.m.at(i, col) = r.h[static_cast<std::size_t>(i)];
        for (int i = 0; i < z; ++i) out.m.at(h + i, col) = r.z[static_cast<std::size_t>(i)];
    }
    return out;
}

std::vector<RegimeMatrix> build_matrices(const vrnn::VrnnModel& model,
                                         const std::vector<Track>& tracks, int threads) {
    std::vector<Track> pieces;
    for (const Track& tr : tracks) {
        if (tr.messages.empty()) throw DomainError("build_matrices: empty track " + tr.id);
        if (tr.duration_s() <= 24 * 3600) {
            pieces.push_back(tr);
            continue;
        }
        const std::int64_t t0 = tr.messages.front().timestamp;
        std::size_t begin = 0;
        int day = static_cast<int>((tr.messages[0].timestamp - t0) / 86400);
        for (std::size_t i = 1; i <= tr.messages.size(); ++i) {
            int d = i < tr.messages.size()
                        ? static_cast<int>((tr.messages[i].timestamp - t0) / 86400)
                        : -1;
            if (d != day) {
                pieces.push_back(day_piece(tr, begin, i, day, true));
                begin = i;
                day = d;
            }
        }
    }

    std::vector<RegimeMatrix> out(pieces.size());
    parallel_for(static_cast<int>(pieces.size()), threads, [&](int i) {
        out[static_cast<std::size_t>(i)] = build_matrix(model, pieces[static_cast<std::size_t>(i)]);
    });
    return out;
}

CnnModel CnnModel::create(const CnnConfig& cfg, Rng& rng) {
    if (cfg.in_rows < 1) throw ConfigError("classifier needs a positive regime dimension");
    if (cfg.conv1_ch < 1 || cfg.conv2_ch < 1) throw ConfigError("classifier channels must be >= 1");
    const int w1 = kDayCols - cfg.kernel_w + 1;
    const int w2 = w1 / 2 - cfg.kernel_w + 1;
    if (cfg.kernel_w < 1 || w2 < 1)
        throw ConfigError("classifier kernel width leaves no output columns");

    CnnModel m;
    m.cfg = cfg;
    m.conv1 = nn::Conv2d(1, cfg.conv1_ch, cfg.in_rows, cfg.kernel_w, 1, nn::Activation::relu);
    m.conv2 = nn::Conv2d(cfg.conv1_ch, cfg.conv2_ch, 1, cfg.kernel_w, 1, nn::Activation::relu);
    m.head = nn::Dense(cfg.conv2_ch, kNumClasses, nn::Activation::identity);
    m.conv1.init(rng);
    m.conv2.init(rng);
    m.head.init(rng);
    return m;
}

std::vector<std::pair<std::string, Tensor*>> CnnModel::params() {
    return {{"conv1.K", &conv1.K}, {"conv1.b", &conv1.b}, {"conv2.K", &conv2.K},
            {"conv2.b", &conv2.b}, {"head.W", &head.W},   {"head.b", &head.b}};
}

std::vector<std::pair<std::string, const Tensor*>> CnnModel::params() const {
    return {{"conv1.K", &conv1.K}, {"conv1.b", &conv1.b}, {"conv2.K", &conv2.K},
            {"conv2.b", &conv2.b}, {"head.W", &head.W},   {"head.b", &head.b}};
}

Prediction predict(const CnnModel& cnn, const RegimeMatrix& matrix) {
    FwdCache fc;
    std::vector<double> logits = logits_of(cnn, matrix, fc);
    std::vector<double> p = softmax(logits);
    Prediction out;
    out.type = static_cast<VesselType>(argmax_index(p));
    std::copy(p.begin(), p.end(), out.prob.begin());
    return out;
}

double classifier_loss(const CnnModel& cnn, const RegimeMatrix& matrix, int label,
                       std::vector<Tensor>* grads) {
    if (label < 0 || label >= kNumClasses) throw DomainError("classifier_loss: bad label");
    FwdCache fc;
    std::vector<double> logits = logits_of(cnn, matrix, fc);
    std::vector<double> p = softmax(logits);
    double loss = -std::log(std::max(p[static_cast<std::size_t>(label)], 1e-300));
    if (grads) {
        CnnGrads g(cnn);
        std::vector<double> dlogits = p;
        dlogits[static_cast<std::size_t>(label)] -= 1.0;
        backward_sample(cnn, fc, dlogits, g);
        grads->clear();
        grads->push_back(std::move(g.conv1.dK));
        grads->push_back(std::move(g.conv1.db));
        grads->push_back(std::move(g.conv2.dK));
        grads->push_back(std::move(g.conv2.db));
        grads->push_back(std::move(g.head.dW));
        grads->push_back(std::move(g.head.db));
    }
    return loss;
}

namespace {

struct SetEval {
    double loss = 0.0;
    double acc = kNan;
};

SetEval eval_set(const CnnModel& m, const std::vector<RegimeMatrix>& set, int threads) {
    if (set.empty()) return {};
    std::vector<double> losses(set.size(), 0.0);
    std::vector<int> hits(set.size(), 0);
    parallel_for(static_cast<int>(set.size()), threads, [&](int i) {
        const RegimeMatrix& rm = set[static_cast<std::size_t>(i)];
        const int y = class_of(rm);
        FwdCache fc;
        std::vector<double> p = softmax(logits_of(m, rm, fc));
        losses[static_cast<std::size_t>(i)] = -std::log(std::max(p[static_cast<std::size_t>(y)], 1e-300));
        hits[static_cast<std::size_t>(i)] = argmax_index(p) == y ? 1 : 0;
    });
    SetEval e;
    int correct = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        e.loss += losses[i];
        correct += hits[i];
    }
    e.loss /= static_cast<double>(set.size());
    e.acc = static_cast<double>(correct) / static_cast<double>(set.size());
    return e;
}

}  // namespace

ClassifierHistory train_classifier(CnnModel& cnn, const std::vector<RegimeMatrix>& train,
                                   const std::vector<RegimeMatrix>& val,
                                   const ClassifierTrainConfig& cfg) {
    if (train.empty()) throw ConfigError("train_classifier: empty training set");
    if (cfg.epochs < 0 || cfg.batch_size < 1)
        throw ConfigError("train_classifier: bad epochs/batch_size");
    std::vector<int> labels;
    labels.reserve(train.size());
    for (const RegimeMatrix& rm : train) labels.push_back(class_of(rm));
    for (const RegimeMatrix& rm : val) class_of(rm);
    std::vector<int> seen(kNumClasses, 0);
    for (int y : labels) seen[static_cast<std::size_t>(y)] = 1;
    if (seen[0] + seen[1] + seen[2] + seen[3] < 2)
        throw ConfigError("train_classifier: training set holds a single class");
    auto check_shape = [&](const RegimeMatrix& rm) {
        if (rm.m.ndim() != 2 || rm.m.shape[0] != cnn.cfg.in_rows || rm.m.shape[1] != kDayCols)
            throw ShapeError("train_classifier: matrix " + rm.track_id + " is " +
                             rm.m.shape_str());
    };
    for (const RegimeMatrix& rm : train) check_shape(rm);
    for (const RegimeMatrix& rm : val) check_shape(rm);

    std::vector<Tensor*> params;
    for (auto& [name, t] : cnn.params()) params.push_back(t);
    nn::AdamOptimizer opt(cfg.lr);

    ClassifierHistory hist;
    SetEval tr0 = eval_set(cnn, train, cfg.threads);
    SetEval va0 = eval_set(cnn, val, cfg.threads);
    hist.epochs.push_back({0, tr0.loss, tr0.acc, va0.acc});

    const int n = static_cast<int>(train.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle(derive_seed(derive_seed(cfg.seed, "classify/shuffle"),
                                static_cast<std::uint64_t>(epoch)));
        for (int i = n - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(shuffle.uniform_int(i + 1))]);

        double loss_sum = 0.0;
        int correct = 0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int bsz = std::min(cfg.batch_size, n - start);
            std::vector<CnnGrads> grads(static_cast<std::size_t>(bsz), CnnGrads(cnn));
            std::vector<double> bl(static_cast<std::size_t>(bsz), 0.0);
            std::vector<int> bh(static_cast<std::size_t>(bsz), 0);
            parallel_for(bsz, cfg.threads, [&](int bi) {
                const int idx = order[static_cast<std::size_t>(start + bi)];
                const RegimeMatrix& rm = train[static_cast<std::size_t>(idx)];
                const int y = labels[static_cast<std::size_t>(idx)];
                FwdCache fc;
                std::vector<double> logits = logits_of(cnn, rm, fc);
                std::vector<double> p = softmax(logits);
                bl[static_cast<std::size_t>(bi)] =
                    -std::log(std::max(p[static_cast<std::size_t>(y)], 1e-300));
                bh[static_cast<std::size_t>(bi)] = argmax_index(p) == y ? 1 : 0;
                std::vector<double> dlogits = p;
                dlogits[static_cast<std::size_t>(y)] -= 1.0;
                for (double& d : dlogits) d /= bsz;
                backward_sample(cnn, fc, dlogits, grads[static_cast<std::size_t>(bi)]);
            });
            for (int bi = 0; bi < bsz; ++bi) {
                loss_sum += bl[static_cast<std::size_t>(bi)];
                correct += bh[static_cast<std::size_t>(bi)];
            }
            CnnGrads total(cnn);
            auto add = [](Tensor& into, const Tensor& from) {
                for (std::int64_t i = 0; i < from.size(); ++i) into[i] += from[i];
            };
            for (const CnnGrads& g : grads) {
                add(total.conv1.dK, g.conv1.dK);
                add(total.conv1.db, g.conv1.db);
                add(total.conv2.dK, g.conv2.dK);
                add(total.conv2.db, g.conv2.db);
                add(total.head.dW, g.head.dW);
                add(total.head.db, g.head.db);
            }
            std::vector<const Tensor*> gptrs = {&total.conv1.dK, &total.conv1.db,
                                                &total.conv2.dK, &total.conv2.db,
                                                &total.head.dW,  &total.head.db};
            opt.step(params, gptrs);
        }

        SetEval va = eval_set(cnn, val, cfg.threads);
        hist.epochs.push_back({epoch, loss_sum / n, static_cast<double>(correct) / n, va.acc});
    }
    return hist;
}

ConfusionMetrics metrics_from_confusion(const std::vector<std::vector<std::int64_t>>& confusion) {
    const std::size_t c = confusion.size();
    if (c == 0) throw ConfigError("metrics_from_confusion: empty matrix");
    for (const auto& row : confusion)
        if (row.size() != c) throw ShapeError("metrics_from_confusion: matrix is not square");

    ConfusionMetrics out;
    out.confusion = confusion;
    out.per_class.resize(c);
    std::int64_t total = 0, trace = 0;
    double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0;
    int present = 0;
    for (std::size_t i = 0; i < c; ++i) {
        std::int64_t tp = confusion[i][i];
        std::int64_t support = 0, predicted = 0;
        for (std::size_t j = 0; j < c; ++j) {
            support += confusion[i][j];
            predicted += confusion[j][i];
        }
        total += support;
        trace += tp;
        ClassMetrics& m = out.per_class[i];
        m.support = support;
        if (support == 0) {
            m.precision = m.recall = m.f1 = kNan;
            continue;
        }
        m.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        m.recall = static_cast<double>(tp) / static_cast<double>(support);
        m.f1 = m.precision + m.recall > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        macro_p += m.precision;
        macro_r += m.recall;
        macro_f += m.f1;
        ++present;
    }
    out.macro_precision = present > 0 ? macro_p / present : kNan;
    out.macro_recall = present > 0 ? macro_r / present : kNan;
    out.macro_f1 = present > 0 ? macro_f / present : kNan;
    out.accuracy = total > 0 ? static_cast<double>(trace) / static_cast<double>(total) : kNan;
    out.micro_precision = out.micro_recall = out.micro_f1 = out.accuracy;
    return out;
}

ConfusionMetrics evaluate(const CnnModel& cnn, const std::vector<RegimeMatrix>& test) {
    if (test.empty()) throw ConfigError("evaluate: empty test set");
    std::vector<std::vector<std::int64_t>> confusion(
        kNumClasses, std::vector<std::int64_t>(kNumClasses, 0));
    for (const RegimeMatrix& rm : test) {
        int truth = class_of(rm);
        int pred = static_cast<int>(predict(cnn, rm).type);
        ++confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
    }
    return metrics_from_confusion(confusion);
}

void save_classifier(const CnnModel& cnn, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open classifier checkpoint for writing: " + path.string());
    os << kMagic << "\n";
    os << "in_rows " << cnn.cfg.in_rows << "\n";
    os << "conv1_ch " << cnn.cfg.conv1_ch << "\n";
    os << "conv2_ch " << cnn.cfg.conv2_ch << "\n";
    os << "kernel_w " << cnn.cfg.kernel_w << "\n";
    auto named = cnn.params();
    os << "param_tensors " << named.size() << "\n";
    for (auto& [name, t] : named) {
        os << "tensor " << name << " " << t->ndim();
        for (int d : t->shape) os << " " << d;
        os << "\n";
    }
    os << "data\n";
    for (auto& [name, t] : named)
        for (double v : t->data) write_f32_le(os, static_cast<float>(v));
    if (!os) throw IoError("failed writing classifier checkpoint: " + path.string());
}

CnnModel load_classifier(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open classifier checkpoint: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != kMagic)
        throw FormatError("not a classifier checkpoint: bad magic in " + path.string());

    std::map<std::string, std::string> fields;
    std::vector<std::pair<std::string, std::vector<int>>> manifest;
    while (std::getline(is, line)) {
        if (line == "data") break;
        std::istringstream ss(line);
        std::vector<std::string> toks;
        std::string t;
        while (ss >> t) toks.push_back(t);
        if (toks.empty()) throw FormatError("empty classifier checkpoint header line");
        if (toks[0] == "tensor") {
            if (toks.size() < 3) throw FormatError("malformed tensor line: " + line);
            const int ndim = static_cast<int>(parse_int(toks[2], "tensor ndim"));
            if (static_cast<int>(toks.size()) != 3 + ndim)
                throw FormatError("malformed tensor line: " + line);
            std::vector<int> shape;
            for (int i = 0; i < ndim; ++i)
                shape.push_back(static_cast<int>(parse_int(toks[static_cast<std::size_t>(3 + i)], "tensor dim")));
            manifest.emplace_back(toks[1], shape);
        } else {
            if (toks.size() != 2) throw FormatError("malformed classifier header line: " + line);
            if (!fields.emplace(toks[0], toks[1]).second)
                throw FormatError("duplicate classifier checkpoint field: " + toks[0]);
        }
    }
    if (line != "data") throw FormatError("classifier checkpoint has no data section");

    auto need = [&](const char* key) -> const std::string& {
        auto it = fields.find(key);
        if (it == fields.end())
            throw FormatError(std::string("classifier checkpoint missing field: ") + key);
        return it->second;
    };
    for (auto& [k, v] : fields) {
        static const char* known[] = {"in_rows", "conv1_ch", "conv2_ch", "kernel_w",
                                      "param_tensors"};
        bool ok = false;
        for (const char* kk : known) ok = ok || (k == kk);
        if (!ok) throw FormatError("unknown classifier checkpoint field: " + k);
    }

    CnnConfig cfg;
    cfg.in_rows = static_cast<int>(parse_int(need("in_rows"), "in_rows"));
    cfg.conv1_ch = static_cast<int>(parse_int(need("conv1_ch"), "conv1_ch"));
    cfg.conv2_ch = static_cast<int>(parse_int(need("conv2_ch"), "conv2_ch"));
    cfg.kernel_w = static_cast<int>(parse_int(need("kernel_w"), "kernel_w"));

    Rng rng(0);
    CnnModel m = CnnModel::create(cfg, rng);
    auto named = m.params();
    if (parse_int(need("param_tensors"), "param_tensors") !=
        static_cast<std::int64_t>(named.size()))
        throw FormatError("classifier checkpoint tensor count mismatch");
    if (manifest.size() != named.size())
        throw FormatError("classifier checkpoint manifest is incomplete");
    for (std::size_t i = 0; i < named.size(); ++i) {
        if (manifest[i].first != named[i].first)
            throw FormatError("classifier checkpoint tensor order mismatch: expected " +
                              named[i].first + ", found " + manifest[i].first);
        if (manifest[i].second != named[i].second->shape)
            throw FormatError("classifier checkpoint shape mismatch for " + named[i].first);
    }
    try {
        for (auto& [name, t] : named)
            for (double& v : t->data) v = static_cast<double>(read_f32_le(is));
    } catch (const IoError&) {
        throw FormatError("classifier checkpoint truncated: " + path.string());
    }
    return m;
}

}  // namespace aistk
