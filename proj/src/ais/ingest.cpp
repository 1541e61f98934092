#include "aistk/ais/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <string>

#include "aistk/errors.hpp"
#include "aistk/geo.hpp"

namespace aistk {

namespace {

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

bool parse_i64(const std::string& s, std::int64_t& out) {
    const std::string t = strip(s);
    if (t.empty()) return false;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc() && p == t.data() + t.size();
}

bool parse_f64(const std::string& s, double& out) {
    const std::string t = strip(s);
    if (t.empty()) return false;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc() && p == t.data() + t.size() && std::isfinite(out);
}

}  // namespace

std::vector<AisMessage> parse_csv(std::istream& in, IngestStats* stats) {
    if (!in.good()) throw IoError("parse_csv: unreadable stream");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("parse_csv: empty input, header expected");
    // Tolerate an extra leading track_id column (our own preprocess output).
    const std::string header = strip(line);
    const std::string want = "mmsi,timestamp,lat,lon,sog,cog,vessel_type";
    bool has_track_id = false;
    if (header == want) {
        has_track_id = false;
    } else if (header == "track_id," + want) {
        has_track_id = true;
    } else {
        throw FormatError("parse_csv: bad header, expected '" + want + "'");
    }

    std::vector<AisMessage> msgs;
    while (std::getline(in, line)) {
        if (strip(line).empty()) continue;
        std::vector<std::string> f = split_fields(line);
        if (has_track_id && !f.empty()) f.erase(f.begin());
        AisMessage m;
        bool ok = f.size() == 7 && parse_i64(f[0], m.mmsi) && parse_i64(f[1], m.timestamp) &&
                  parse_f64(f[2], m.lat) && parse_f64(f[3], m.lon) && parse_f64(f[4], m.sog) &&
                  parse_f64(f[5], m.cog);
        if (ok) {
            const std::string vt = strip(f[6]);
            if (!vt.empty()) {
                m.vessel_type = vessel_type_from_name(vt);
                if (!m.vessel_type) ok = false;
            }
        }
        if (!ok) {
            if (stats) ++stats->rows_malformed;
            continue;
        }
        if (stats) ++stats->rows_parsed;
        msgs.push_back(m);
    }
    if (in.bad()) throw IoError("parse_csv: stream error while reading");
    return msgs;
}

std::vector<AisMessage> validate(std::vector<AisMessage> msgs, const RoiConfig& roi,
                                 IngestStats* stats) {
    std::vector<AisMessage> out;
    out.reserve(msgs.size());
    for (const AisMessage& m : msgs) {
        if (m.timestamp <= 0) {
            if (stats) ++stats->dropped_bad_timestamp;
            continue;
        }
        if (!roi.contains(m.lat, m.lon)) {
            if (stats) ++stats->dropped_out_of_roi;
            continue;
        }
        if (!(m.sog >= 0.0) || m.sog >= roi.sog_max) {
            if (stats) ++stats->dropped_bad_sog;
            continue;
        }
        if (!(m.cog >= 0.0) || m.cog >= 360.0) {
            if (stats) ++stats->dropped_bad_cog;
            continue;
        }
        out.push_back(m);
    }
    return out;
}

std::vector<Track> build_tracks(std::vector<AisMessage> msgs, const TrackBuildConfig& cfg,
                                IngestStats* stats) {
    std::map<std::int64_t, std::vector<AisMessage>> by_mmsi;
    for (AisMessage& m : msgs) by_mmsi[m.mmsi].push_back(std::move(m));

    std::vector<Track> out;
    for (auto& [mmsi, ms] : by_mmsi) {
        std::stable_sort(ms.begin(), ms.end(), [](const AisMessage& a, const AisMessage& b) {
            return a.timestamp < b.timestamp;
        });
        // Duplicate timestamps: keep the first occurrence.
        std::vector<AisMessage> dedup;
        dedup.reserve(ms.size());
        for (const AisMessage& m : ms)
            if (dedup.empty() || m.timestamp != dedup.back().timestamp) dedup.push_back(m);

        // Split at long gaps, then cut greedily at the max-duration boundary.
        std::vector<std::vector<AisMessage>> pieces;
        std::vector<AisMessage> cur;
        for (const AisMessage& m : dedup) {
            if (!cur.empty() && m.timestamp - cur.back().timestamp > cfg.gap_split_s) {
                pieces.push_back(std::move(cur));
                cur.clear();
            }
            cur.push_back(m);
        }
        if (!cur.empty()) pieces.push_back(std::move(cur));

        int sub = 0;
        for (const std::vector<AisMessage>& piece : pieces) {
            std::size_t i = 0;
            while (i < piece.size()) {
                const std::int64_t start = piece[i].timestamp;
                std::size_t j = i;
                while (j < piece.size() && piece[j].timestamp - start <= cfg.max_duration_s) ++j;
                Track t;
                t.mmsi = mmsi;
                t.messages.assign(piece.begin() + static_cast<std::ptrdiff_t>(i),
                                  piece.begin() + static_cast<std::ptrdiff_t>(j));
                i = j;
                if (t.duration_s() >= cfg.min_duration_s) {
                    t.id = std::to_string(mmsi) + "_" + std::to_string(sub++);
                    if (stats) ++stats->tracks_built;
                    out.push_back(std::move(t));
                } else {
                    if (stats) ++stats->tracks_discarded_short;
                }
            }
        }
    }
    return out;
}

std::vector<Track> remove_stationary(std::vector<Track> tracks, double slow_knots,
                                     double max_slow_fraction, IngestStats* stats) {
    std::vector<Track> out;
    out.reserve(tracks.size());
    for (Track& t : tracks) {
        if (t.messages.empty()) continue;
        std::int64_t slow = 0;
        for (const AisMessage& m : t.messages)
            if (m.sog < slow_knots) ++slow;
        const double frac = static_cast<double>(slow) / static_cast<double>(t.messages.size());
        if (frac > max_slow_fraction) {
            if (stats) ++stats->tracks_dropped_stationary;
            continue;
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::optional<Track> resample_train(const Track& track, const RoiConfig& roi,
                                    std::int64_t max_gap_s) {
    if (track.messages.size() < 2) return std::nullopt;
    for (std::size_t i = 1; i < track.messages.size(); ++i)
        if (track.messages[i].timestamp - track.messages[i - 1].timestamp > max_gap_s)
            return std::nullopt;

    const std::int64_t t0 = track.messages.front().timestamp;
    const std::int64_t t_last = track.messages.back().timestamp;
    Track out;
    out.mmsi = track.mmsi;
    out.id = track.id;
    out.anomaly = track.anomaly;

    std::size_t seg = 0;  // index of the bracketing segment start
    for (std::int64_t t = t0; t <= t_last; t += roi.dt) {
        while (seg + 1 < track.messages.size() && track.messages[seg + 1].timestamp < t) ++seg;
        const AisMessage& a = track.messages[seg];
        const AisMessage& b = track.messages[std::min(seg + 1, track.messages.size() - 1)];
        AisMessage m;
        m.mmsi = track.mmsi;
        m.timestamp = t;
        m.vessel_type = a.vessel_type;
        if (b.timestamp == a.timestamp) {
            m.lat = a.lat;
            m.lon = a.lon;
            m.sog = a.sog;
            m.cog = a.cog;
        } else {
            const double alpha = static_cast<double>(t - a.timestamp) /
                                 static_cast<double>(b.timestamp - a.timestamp);
            m.lat = a.lat + alpha * (b.lat - a.lat);
            m.lon = a.lon + alpha * (b.lon - a.lon);
            m.sog = a.sog + alpha * (b.sog - a.sog);
            m.cog = circular_interp_deg(a.cog, b.cog, alpha);
        }
        out.messages.push_back(m);
    }
    return out;
}

GridTrack to_grid(const Track& track, const RoiConfig& roi) {
    GridTrack g;
    g.mmsi = track.mmsi;
    g.id = track.id;
    g.dt = roi.dt;
    g.label = track.label();
    g.anomaly = track.anomaly;
    if (track.messages.empty()) return g;
    g.t0 = track.messages.front().timestamp;
    const std::int64_t span = track.messages.back().timestamp - g.t0;
    const std::int64_t n_slots = (span + roi.dt - 1) / roi.dt + 1;  // ceil(span/dt)+1
    g.slots.assign(static_cast<std::size_t>(n_slots), std::nullopt);
    for (const AisMessage& m : track.messages) {
        const double pos = static_cast<double>(m.timestamp - g.t0) / roi.dt;
        std::int64_t slot = std::llround(pos);
        slot = std::clamp<std::int64_t>(slot, 0, n_slots - 1);
        const std::int64_t slot_time = g.t0 + slot * roi.dt;
        const std::int64_t dist = std::llabs(m.timestamp - slot_time);
        auto& cell = g.slots[static_cast<std::size_t>(slot)];
        if (!cell.has_value() ||
            dist < std::llabs(cell->timestamp - slot_time))
            cell = m;
    }
    return g;
}

GridTrack grid_from_regular(const Track& track, const RoiConfig& roi) {
    GridTrack g;
    g.mmsi = track.mmsi;
    g.id = track.id;
    g.dt = roi.dt;
    g.label = track.label();
    g.anomaly = track.anomaly;
    if (track.messages.empty()) return g;
    g.t0 = track.messages.front().timestamp;
    const std::int64_t span = track.messages.back().timestamp - g.t0;
    if (span % roi.dt != 0)
        throw FormatError("grid_from_regular: track span not a multiple of dt");
    g.slots.assign(static_cast<std::size_t>(span / roi.dt + 1), std::nullopt);
    for (const AisMessage& m : track.messages) {
        const std::int64_t off = m.timestamp - g.t0;
        if (off % roi.dt != 0)
            throw FormatError("grid_from_regular: timestamp " + std::to_string(m.timestamp) +
                              " is off the dt grid");
        g.slots[static_cast<std::size_t>(off / roi.dt)] = m;
    }
    return g;
}

}  // namespace aistk
