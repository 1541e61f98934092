#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aistk {

enum class VesselType { cargo, passenger, tanker, tug, other };

const char* vessel_type_name(VesselType t);
std::optional<VesselType> vessel_type_from_name(const std::string& name);

struct AisMessage {
    std::int64_t mmsi = 0;
    std::int64_t timestamp = 0;  // seconds since epoch, UTC
    double lat = 0.0;            // degrees
    double lon = 0.0;            // degrees
    double sog = 0.0;            // knots
    double cog = 0.0;            // degrees in [0, 360)
    std::optional<VesselType> vessel_type;
};

/// Time-ordered message sequence of one vessel (a 4-24h subtrack after the
/// pipeline has run). `id` distinguishes subtracks of the same mmsi.
struct Track {
    std::int64_t mmsi = 0;
    std::string id;
    std::vector<AisMessage> messages;
    std::string anomaly;  // empty = none; otherwise the injected anomaly kind

    std::int64_t duration_s() const {
        return messages.empty() ? 0 : messages.back().timestamp - messages.front().timestamp;
    }
    std::optional<VesselType> label() const {
        return messages.empty() ? std::nullopt : messages.front().vessel_type;
    }
};

/// Region of interest plus the bin geometry of the four-hot encoding.
struct RoiConfig {
    double lat_min = 0.0, lat_max = 0.0;
    double lon_min = 0.0, lon_max = 0.0;
    int lat_bins = 0, lon_bins = 0;  // 0 = derive from the ~1 km resolution
    int sog_bins = 0;                // 0 = derive from 1-knot resolution
    int cog_bins = 0;                // 0 = derive from 5-degree resolution
    double sog_max = 30.0;           // knots; messages at or above are invalid
    int dt = 600;                    // resampling period, seconds

    double lat_center() const { return 0.5 * (lat_min + lat_max); }
    double lon_center() const { return 0.5 * (lon_min + lon_max); }

    /// Fills any zero bin count from the default resolutions (about 1 km in
    /// latitude/longitude, 1 knot, 5 degrees) and validates the geometry.
    void finalize();

    int total_bins() const { return lat_bins + lon_bins + sog_bins + cog_bins; }

    bool contains(double lat, double lon) const {
        return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
    }

    bool operator==(const RoiConfig&) const = default;
};

/// A track snapped to the dt grid: slot i is at t0 + i*dt; slots with no
/// observation are empty. This is the form the model scores and reconstructs.
struct GridTrack {
    std::int64_t mmsi = 0;
    std::string id;
    std::int64_t t0 = 0;
    int dt = 600;
    std::vector<std::optional<AisMessage>> slots;
    std::optional<VesselType> label;
    std::string anomaly;

    int size() const { return static_cast<int>(slots.size()); }
    bool observed(int i) const { return slots[static_cast<std::size_t>(i)].has_value(); }
    std::int64_t time_at(int i) const { return t0 + static_cast<std::int64_t>(i) * dt; }
    int observed_count() const;
};

}  // namespace aistk
