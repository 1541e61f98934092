#include "aistk/ais/types.hpp"

#include <cmath>

#include "aistk/errors.hpp"
#include "aistk/geo.hpp"

namespace aistk {

const char* vessel_type_name(VesselType t) {
    switch (t) {
        case VesselType::cargo: return "cargo";
        case VesselType::passenger: return "passenger";
        case VesselType::tanker: return "tanker";
        case VesselType::tug: return "tug";
        case VesselType::other: return "other";
    }
    return "other";
}

std::optional<VesselType> vessel_type_from_name(const std::string& name) {
    if (name == "cargo") return VesselType::cargo;
    if (name == "passenger") return VesselType::passenger;
    if (name == "tanker") return VesselType::tanker;
    if (name == "tug") return VesselType::tug;
    if (name == "other") return VesselType::other;
    return std::nullopt;
}

void RoiConfig::finalize() {
    if (!(lat_min < lat_max) || !(lon_min < lon_max))
        throw ConfigError("roi: min must be strictly below max on both axes");
    if (!(sog_max > 0.0)) throw ConfigError("roi: sog_max must be positive");
    if (dt <= 0) throw ConfigError("roi: dt must be positive");
    const LocalFrame frame(lat_center());
    if (lat_bins == 0)
        lat_bins = static_cast<int>(std::ceil(frame.dlat_to_km(lat_max - lat_min)));
    if (lon_bins == 0)
        lon_bins = static_cast<int>(std::ceil(frame.dlon_to_km(lon_max - lon_min)));
    if (sog_bins == 0) sog_bins = static_cast<int>(std::ceil(sog_max / 1.0));
    if (cog_bins == 0) cog_bins = static_cast<int>(std::ceil(360.0 / 5.0));
    if (lat_bins < 1 || lon_bins < 1 || sog_bins < 1 || cog_bins < 1)
        throw ConfigError("roi: all bin counts must be >= 1");
}

int GridTrack::observed_count() const {
    int n = 0;
    for (const auto& s : slots)
        if (s.has_value()) ++n;
    return n;
}

}  // namespace aistk
