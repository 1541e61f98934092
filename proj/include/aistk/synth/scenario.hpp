#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aistk/ais/types.hpp"
#include "aistk/configfile.hpp"

namespace aistk::synth {

struct NoiseConfig {
    double pos_km = 0.0;   // per-axis Gaussian sigma on position
    double sog_kn = 0.0;
    double cog_deg = 0.0;
    double dropout = 0.0;  // independent per-fix drop probability
};

/// Waypoint polyline a vessel follows back and forth at constant speed.
struct Route {
    std::string name;
    std::vector<std::pair<double, double>> waypoints;  // (lat, lon)
};

enum class Motion { route, loop };

struct VesselClass {
    std::string name;
    VesselType type = VesselType::other;
    Motion motion = Motion::route;
    std::vector<std::string> routes;  // route motion: each vessel picks one
    double center_lat = 0.0;          // loop motion: circle geometry
    double center_lon = 0.0;
    double radius_km = 0.0;
    double speed_min = 0.0;  // knots; per-vessel speed drawn uniformly
    double speed_max = 0.0;
    int count = 0;
    int duration_steps = 144;  // fixes at the 10-minute cadence
};

struct Scenario {
    RoiConfig roi;
    NoiseConfig noise;
    std::vector<Route> routes;
    std::vector<VesselClass> classes;
    std::int64_t base_time = 1600000000;
    std::uint64_t seed = 1;

    const Route& route(const std::string& name) const;  // throws ConfigError if unknown
};

/// Parses a scenario document: [roi], optional [sim] and [noise], any number
/// of [route NAME] and [class NAME] sections. Geometry that leaves the ROI is
/// a ConfigError.
Scenario parse_scenario(const ConfigDoc& doc);
Scenario load_scenario(const std::string& path);

/// All vessels of all classes, in declaration order. Each vessel draws from
/// its own substream of the scenario seed, so per-vessel output is stable
/// under changes to other vessels or classes.
std::vector<Track> generate(const Scenario& sc);

Track generate_vessel(const Scenario& sc, const VesselClass& cls, int vessel_index);

enum class AnomalyKind { translate_km, u_turn, speed_spike, zone_swap };
const char* anomaly_kind_name(AnomalyKind kind);

/// Applies a labeled perturbation and sets the track's anomaly tag. Magnitude
/// units depend on the kind: km for translate_km, minutes for u_turn, knots
/// for speed_spike, and the fraction of the centroid-to-target displacement
/// for zone_swap (which requires `target`). Magnitude 0 returns the track
/// unchanged.
Track inject_anomaly(const Track& track, AnomalyKind kind, double magnitude,
                     std::optional<std::pair<double, double>> target = std::nullopt);

}  // namespace aistk::synth
