#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "aistk/ais/types.hpp"

namespace aistk {

/// Canonical track artifact, one row per fix:
///   track_id,mmsi,timestamp,lat,lon,sog,cog,type,anomaly
/// Doubles use round-trippable %.17g formatting so rewrites are byte-stable.
/// Rows of one track are contiguous; file order is preserved.
void save_tracks(const std::vector<Track>& tracks, std::ostream& os);
void save_tracks(const std::vector<Track>& tracks, const std::filesystem::path& path);

std::vector<Track> load_tracks(std::istream& is);
std::vector<Track> load_tracks(const std::filesystem::path& path);

/// The ingest interchange schema (mmsi,timestamp,lat,lon,sog,cog,vessel_type),
/// written track by track; parse_csv reads it back.
void save_messages(const std::vector<Track>& tracks, std::ostream& os);
void save_messages(const std::vector<Track>& tracks, const std::filesystem::path& path);

}  // namespace aistk
