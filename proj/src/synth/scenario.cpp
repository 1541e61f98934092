#include "aistk/synth/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aistk/binio.hpp"
#include "aistk/errors.hpp"
#include "aistk/geo.hpp"
#include "aistk/rng.hpp"

namespace aistk::synth {

namespace {

constexpr double DEG = std::numbers::pi / 180.0;

struct Vec2 {
    double x = 0.0, y = 0.0;  // km east / km north
};

/// Constant-speed position lookup along a polyline, with ping-pong folding so
/// vessels stay on the route for the whole track.
struct Polyline {
    std::vector<Vec2> pts;
    std::vector<double> cum;  // cumulative length, cum[0] = 0
    double total = 0.0;

    Polyline(const Route& r, const LocalFrame& f, const RoiConfig& roi) {
        pts.reserve(r.waypoints.size());
        for (const auto& [lat, lon] : r.waypoints)
            pts.push_back({f.dlon_to_km(lon - roi.lon_center()), f.dlat_to_km(lat - roi.lat_center())});
        cum.resize(pts.size(), 0.0);
        for (std::size_t i = 1; i < pts.size(); ++i) {
            double dx = pts[i].x - pts[i - 1].x;
            double dy = pts[i].y - pts[i - 1].y;
            cum[i] = cum[i - 1] + std::hypot(dx, dy);
        }
        total = cum.back();
    }

    Vec2 at(double s) const {
        double period = 2.0 * total;
        double m = std::fmod(s, period);
        if (m < 0.0) m += period;
        if (m > total) m = period - m;
        auto it = std::upper_bound(cum.begin(), cum.end(), m);
        std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
        if (hi == 0) hi = 1;
        std::size_t lo = hi - 1;
        double seg = cum[hi] - cum[lo];
        double a = seg > 0.0 ? (m - cum[lo]) / seg : 0.0;
        return {pts[lo].x + a * (pts[hi].x - pts[lo].x), pts[lo].y + a * (pts[hi].y - pts[lo].y)};
    }
};

double course_of(const Vec2& from, const Vec2& to) {
    return wrap_deg(std::atan2(to.x - from.x, to.y - from.y) / DEG);
}

std::vector<Vec2> true_positions(const Scenario& sc, const VesselClass& cls, Rng& rng,
                                 double speed_kn) {
    const int n = cls.duration_steps;
    double step_km = knots_to_km_per_s(speed_kn) * sc.roi.dt;
    std::vector<Vec2> p;
    p.reserve(static_cast<std::size_t>(n));
    if (cls.motion == Motion::route) {
        LocalFrame frame(sc.roi.lat_center());
        Polyline line(sc.route(cls.routes[rng.uniform_int(cls.routes.size())]), frame, sc.roi);
        double s0 = rng.uniform(0.0, line.total);
        double dir = rng.bernoulli(0.5) ? 1.0 : -1.0;
        for (int k = 0; k < n; ++k) p.push_back(line.at(s0 + dir * step_km * k));
    } else {
        LocalFrame frame(sc.roi.lat_center());
        Vec2 c{frame.dlon_to_km(cls.center_lon - sc.roi.lon_center()),
               frame.dlat_to_km(cls.center_lat - sc.roi.lat_center())};
        double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        double dir = rng.bernoulli(0.5) ? 1.0 : -1.0;
        double omega = dir * step_km / cls.radius_km;  // radians per step
        for (int k = 0; k < n; ++k) {
            double a = theta + omega * k;
            p.push_back({c.x + cls.radius_km * std::cos(a), c.y + cls.radius_km * std::sin(a)});
        }
    }
    return p;
}

int class_index(const Scenario& sc, const VesselClass& cls) {
    for (std::size_t i = 0; i < sc.classes.size(); ++i)
        if (sc.classes[i].name == cls.name) return static_cast<int>(i);
    return 0;
}

std::pair<double, double> parse_latlon(const std::string& tok, const std::string& what) {
    std::size_t comma = tok.find(',');
    if (comma == std::string::npos) throw ConfigError(what + ": expected 'lat,lon', got '" + tok + "'");
    double lat = parse_double(tok.substr(0, comma), what + " lat");
    double lon = parse_double(tok.substr(comma + 1), what + " lon");
    return {lat, lon};
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t j = s.find_first_of(" \t", i);
        if (j == std::string::npos) j = s.size();
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j + 1;
    }
    return out;
}

}  // namespace

const Route& Scenario::route(const std::string& name) const {
    for (const auto& r : routes)
        if (r.name == name) return r;
    throw ConfigError("unknown route '" + name + "'");
}

Scenario parse_scenario(const ConfigDoc& doc) {
    Scenario sc;
    for (const auto& s : doc.sections) {
        if (s.kind != "roi" && s.kind != "sim" && s.kind != "noise" && s.kind != "route" &&
            s.kind != "class")
            throw ConfigError("unknown scenario section [" + s.label() + "]");
    }
    sc.roi = roi_from_section(doc.require("roi"));

    if (const ConfigSection* sim = doc.find("sim")) {
        sim->check_keys({"seed", "base_time"});
        sc.seed = sim->get_u64("seed", sc.seed);
        sc.base_time = sim->get_i64("base_time", sc.base_time);
    }
    if (const ConfigSection* nz = doc.find("noise")) {
        nz->check_keys({"pos_km", "sog_kn", "cog_deg", "dropout"});
        sc.noise.pos_km = nz->get_double("pos_km", 0.0);
        sc.noise.sog_kn = nz->get_double("sog_kn", 0.0);
        sc.noise.cog_deg = nz->get_double("cog_deg", 0.0);
        sc.noise.dropout = nz->get_double("dropout", 0.0);
        if (sc.noise.pos_km < 0 || sc.noise.sog_kn < 0 || sc.noise.cog_deg < 0)
            throw ConfigError("[noise] sigmas must be non-negative");
        if (sc.noise.dropout < 0 || sc.noise.dropout > 1)
            throw ConfigError("[noise] dropout must be in [0, 1]");
    }

    for (const ConfigSection* rs : doc.all("route")) {
        if (rs->name.empty()) throw ConfigError("[route] section needs a name");
        rs->check_keys({"waypoints"});
        Route r;
        r.name = rs->name;
        for (const std::string& tok : split_ws(rs->get_string("waypoints")))
            r.waypoints.push_back(parse_latlon(tok, "[route " + r.name + "]"));
        if (r.waypoints.size() < 2)
            throw ConfigError("[route " + r.name + "] needs at least two waypoints");
        for (const auto& [lat, lon] : r.waypoints)
            if (!sc.roi.contains(lat, lon))
                throw ConfigError("[route " + r.name + "] waypoint " + fmt_g17(lat) + "," +
                                  fmt_g17(lon) + " is outside the roi");
        for (const auto& prev : sc.routes)
            if (prev.name == r.name) throw ConfigError("duplicate route '" + r.name + "'");
        sc.routes.push_back(std::move(r));
    }

    for (const ConfigSection* cs : doc.all("class")) {
        if (cs->name.empty()) throw ConfigError("[class] section needs a name");
        cs->check_keys({"type", "motion", "routes", "center", "radius_km", "speed_min", "speed_max",
                        "count", "duration_steps"});
        VesselClass c;
        c.name = cs->name;
        std::string type = cs->get_string("type", "other");
        auto vt = vessel_type_from_name(type);
        if (!vt) throw ConfigError("[class " + c.name + "] unknown vessel type '" + type + "'");
        c.type = *vt;
        std::string motion = cs->get_string("motion", "route");
        if (motion == "route")
            c.motion = Motion::route;
        else if (motion == "loop")
            c.motion = Motion::loop;
        else
            throw ConfigError("[class " + c.name + "] motion must be 'route' or 'loop'");
        c.speed_min = cs->get_double("speed_min");
        c.speed_max = cs->get_double("speed_max");
        c.count = cs->get_int("count");
        c.duration_steps = cs->get_int("duration_steps", c.duration_steps);
        if (c.speed_min < 0 || c.speed_max < c.speed_min)
            throw ConfigError("[class " + c.name + "] needs 0 <= speed_min <= speed_max");
        if (c.speed_max >= sc.roi.sog_max)
            throw ConfigError("[class " + c.name + "] speed_max must stay below roi sog_max");
        if (c.count < 0) throw ConfigError("[class " + c.name + "] count must be non-negative");
        if (c.duration_steps < 2)
            throw ConfigError("[class " + c.name + "] duration_steps must be at least 2");

        if (c.motion == Motion::route) {
            c.routes = split_ws(cs->get_string("routes"));
            if (c.routes.empty()) throw ConfigError("[class " + c.name + "] routes is empty");
            for (const auto& rn : c.routes) sc.route(rn);  // existence check
        } else {
            auto [lat, lon] = parse_latlon(cs->get_string("center"), "[class " + c.name + "] center");
            c.center_lat = lat;
            c.center_lon = lon;
            c.radius_km = cs->get_double("radius_km");
            if (c.radius_km <= 0) throw ConfigError("[class " + c.name + "] radius_km must be > 0");
            LocalFrame frame(sc.roi.lat_center());
            double dlat = frame.km_to_dlat(c.radius_km);
            double dlon = frame.km_to_dlon(c.radius_km);
            if (!sc.roi.contains(lat - dlat, lon - dlon) || !sc.roi.contains(lat + dlat, lon + dlon))
                throw ConfigError("[class " + c.name + "] loop circle leaves the roi");
        }
        for (const auto& prev : sc.classes)
            if (prev.name == c.name) throw ConfigError("duplicate class '" + c.name + "'");
        sc.classes.push_back(std::move(c));
    }
    return sc;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(load_config(path)); }

Track generate_vessel(const Scenario& sc, const VesselClass& cls, int vessel_index) {
    int ci = class_index(sc, cls);
    Rng rng(derive_seed(derive_seed(sc.seed, "synth/" + cls.name),
                        static_cast<std::uint64_t>(vessel_index)));
    double speed = rng.uniform(cls.speed_min, cls.speed_max);
    std::vector<Vec2> pos = true_positions(sc, cls, rng, speed);
    const int n = static_cast<int>(pos.size());

    LocalFrame frame(sc.roi.lat_center());
    Track tr;
    tr.mmsi = 200000000 + static_cast<std::int64_t>(ci) * 100000 + vessel_index;
    tr.id = cls.name + "_" + std::to_string(vessel_index);
    for (int k = 0; k < n; ++k) {
        double course = 0.0;
        if (k + 1 < n)
            course = course_of(pos[static_cast<std::size_t>(k)], pos[static_cast<std::size_t>(k) + 1]);
        else if (k > 0)
            course = course_of(pos[static_cast<std::size_t>(k) - 1], pos[static_cast<std::size_t>(k)]);
        double nx = rng.normal() * sc.noise.pos_km;
        double ny = rng.normal() * sc.noise.pos_km;
        double nsog = rng.normal() * sc.noise.sog_kn;
        double ncog = rng.normal() * sc.noise.cog_deg;
        bool drop = rng.bernoulli(sc.noise.dropout);
        if (drop) continue;

        AisMessage m;
        m.mmsi = tr.mmsi;
        m.timestamp = sc.base_time + static_cast<std::int64_t>(k) * sc.roi.dt;
        m.lat = std::clamp(sc.roi.lat_center() + frame.km_to_dlat(pos[static_cast<std::size_t>(k)].y + ny),
                           sc.roi.lat_min, sc.roi.lat_max);
        m.lon = std::clamp(sc.roi.lon_center() + frame.km_to_dlon(pos[static_cast<std::size_t>(k)].x + nx),
                           sc.roi.lon_min, sc.roi.lon_max);
        m.sog = std::clamp(speed + nsog, 0.0, sc.roi.sog_max - 1e-9);
        m.cog = wrap_deg(course + ncog);
        m.vessel_type = cls.type;
        tr.messages.push_back(m);
    }
    return tr;
}

std::vector<Track> generate(const Scenario& sc) {
    std::vector<Track> out;
    for (const auto& cls : sc.classes)
        for (int i = 0; i < cls.count; ++i) out.push_back(generate_vessel(sc, cls, i));
    return out;
}

const char* anomaly_kind_name(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::translate_km: return "translate_km";
        case AnomalyKind::u_turn: return "u_turn";
        case AnomalyKind::speed_spike: return "speed_spike";
        case AnomalyKind::zone_swap: return "zone_swap";
    }
    return "?";
}

Track inject_anomaly(const Track& track, AnomalyKind kind, double magnitude,
                     std::optional<std::pair<double, double>> target) {
    Track out = track;
    if (magnitude == 0.0 || track.messages.size() < 2) return out;
    out.anomaly = anomaly_kind_name(kind);

    auto& msgs = out.messages;
    const int n = static_cast<int>(msgs.size());
    double mean_lat = 0.0;
    for (const auto& m : msgs) mean_lat += m.lat;
    mean_lat /= n;
    LocalFrame frame(mean_lat);

    if (kind == AnomalyKind::translate_km) {
        const AisMessage& a = msgs.front();
        const AisMessage& b = msgs.back();
        double heading = frame.distance_km(a.lat, a.lon, b.lat, b.lon) > 1e-6
                             ? bearing_deg(frame, a.lat, a.lon, b.lat, b.lon)
                             : 0.0;
        double shift = wrap_deg(heading + 90.0) * DEG;
        double dlat = frame.km_to_dlat(magnitude * std::cos(shift));
        double dlon = frame.km_to_dlon(magnitude * std::sin(shift));
        for (auto& m : msgs) {
            m.lat += dlat;
            m.lon += dlon;
        }
        return out;
    }

    if (kind == AnomalyKind::zone_swap) {
        if (!target) throw DomainError("zone_swap needs a target position");
        double clat = 0.0, clon = 0.0;
        for (const auto& m : msgs) {
            clat += m.lat;
            clon += m.lon;
        }
        clat /= n;
        clon /= n;
        double dlat = magnitude * (target->first - clat);
        double dlon = magnitude * (target->second - clon);
        for (auto& m : msgs) {
            m.lat += dlat;
            m.lon += dlon;
        }
        return out;
    }

    // The remaining kinds rewrite motion through per-step displacement vectors.
    std::vector<Vec2> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        p[static_cast<std::size_t>(i)] = {frame.dlon_to_km(msgs[static_cast<std::size_t>(i)].lon),
                                          frame.dlat_to_km(msgs[static_cast<std::size_t>(i)].lat)};
    std::vector<Vec2> delta(static_cast<std::size_t>(n - 1));
    for (int i = 0; i + 1 < n; ++i)
        delta[static_cast<std::size_t>(i)] = {p[static_cast<std::size_t>(i) + 1].x - p[static_cast<std::size_t>(i)].x,
                                              p[static_cast<std::size_t>(i) + 1].y - p[static_cast<std::size_t>(i)].y};
    const int mid = n / 2;
    std::vector<Vec2> q = p;
    int first_changed = n;

    if (kind == AnomalyKind::u_turn) {
        int span = static_cast<int>(std::lround(magnitude / 10.0));  // minutes -> steps
        if (span <= 0) return track;
        first_changed = mid + 1;
        for (int t = mid; t + 1 < n; ++t) {
            Vec2 d;
            if (t - mid < span) {
                int src = std::max(0, mid - 1 - (t - mid));
                d = {-delta[static_cast<std::size_t>(src)].x, -delta[static_cast<std::size_t>(src)].y};
            } else {
                d = delta[static_cast<std::size_t>(t)];
            }
            q[static_cast<std::size_t>(t) + 1] = {q[static_cast<std::size_t>(t)].x + d.x,
                                                  q[static_cast<std::size_t>(t)].y + d.y};
        }
        for (int t = mid; t < std::min(n, mid + span); ++t)
            msgs[static_cast<std::size_t>(t)].cog = wrap_deg(msgs[static_cast<std::size_t>(t)].cog + 180.0);
    } else {  // speed_spike
        const int half = 3;  // one hour of faster motion centered mid-track
        int lo = std::max(0, mid - half), hi = std::min(n - 1, mid + half);
        first_changed = lo + 1;
        for (int t = lo; t + 1 < n; ++t) {
            Vec2 d = delta[static_cast<std::size_t>(t)];
            if (t < hi) {
                double sog = msgs[static_cast<std::size_t>(t)].sog;
                double f = sog > 0.5 ? (sog + magnitude) / sog : 1.0;
                d = {d.x * f, d.y * f};
                msgs[static_cast<std::size_t>(t)].sog = sog + magnitude;
            }
            q[static_cast<std::size_t>(t) + 1] = {q[static_cast<std::size_t>(t)].x + d.x,
                                                  q[static_cast<std::size_t>(t)].y + d.y};
        }
    }

    for (int i = first_changed; i < n; ++i) {
        msgs[static_cast<std::size_t>(i)].lon = frame.km_to_dlon(q[static_cast<std::size_t>(i)].x);
        msgs[static_cast<std::size_t>(i)].lat = frame.km_to_dlat(q[static_cast<std::size_t>(i)].y);
    }
    return out;
}

}  // namespace aistk::synth
