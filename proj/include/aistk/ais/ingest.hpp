#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "aistk/ais/types.hpp"

namespace aistk {

/// Counters reported by the preprocessing pipeline (--stats).
struct IngestStats {
    std::int64_t rows_parsed = 0;
    std::int64_t rows_malformed = 0;
    std::int64_t dropped_out_of_roi = 0;
    std::int64_t dropped_bad_sog = 0;
    std::int64_t dropped_bad_cog = 0;
    std::int64_t dropped_bad_timestamp = 0;
    std::int64_t tracks_built = 0;
    std::int64_t tracks_discarded_short = 0;
    std::int64_t tracks_dropped_stationary = 0;
    std::int64_t tracks_rejected_gap = 0;
    std::int64_t tracks_emitted = 0;
};

/// Parses the CSV interchange format:
///   mmsi,timestamp,lat,lon,sog,cog,vessel_type
/// vessel_type may be empty. Malformed rows are counted and skipped.
/// Missing or wrong header throws FormatError; a bad stream throws IoError.
std::vector<AisMessage> parse_csv(std::istream& in, IngestStats* stats = nullptr);

/// Drops messages outside the ROI box, with sog >= sog_max or sog < 0, with
/// cog outside [0, 360), or with a non-positive timestamp.
std::vector<AisMessage> validate(std::vector<AisMessage> msgs, const RoiConfig& roi,
                                 IngestStats* stats = nullptr);

struct TrackBuildConfig {
    std::int64_t gap_split_s = 2 * 3600;
    std::int64_t min_duration_s = 4 * 3600;
    std::int64_t max_duration_s = 24 * 3600;
};

/// Groups by mmsi, sorts by time, drops duplicate timestamps (first kept),
/// splits at gaps larger than gap_split_s, then cuts greedily at the
/// max-duration boundary. Pieces shorter than min_duration_s are discarded.
std::vector<Track> build_tracks(std::vector<AisMessage> msgs, const TrackBuildConfig& cfg = {},
                                IngestStats* stats = nullptr);

/// Drops tracks where more than `max_slow_fraction` of messages move slower
/// than `slow_knots`.
std::vector<Track> remove_stationary(std::vector<Track> tracks, double slow_knots = 0.1,
                                     double max_slow_fraction = 0.8,
                                     IngestStats* stats = nullptr);

/// Rejects tracks containing any inter-message gap above max_gap_s (returns
/// nullopt), otherwise emits messages at exact multiples of roi.dt from the
/// first timestamp. Position and sog interpolate linearly in time; cog
/// interpolates along the shortest arc.
std::optional<Track> resample_train(const Track& track, const RoiConfig& roi,
                                    std::int64_t max_gap_s = 3600);

/// Snaps a track to the dt grid without interpolation: each slot takes the
/// nearest message in time (ties keep the earlier one); slots without a
/// message within dt/2 stay empty. Slot count is ceil(span/dt)+1.
GridTrack to_grid(const Track& track, const RoiConfig& roi);

/// A resampled track is already on the grid; this is the exact conversion,
/// throws FormatError if any timestamp is off-grid.
GridTrack grid_from_regular(const Track& track, const RoiConfig& roi);

}  // namespace aistk
