#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "aistk/ais/types.hpp"
#include "aistk/rng.hpp"
#include "aistk/tensor.hpp"

namespace aistk {

/// Offsets of the four one-hot blocks inside the concatenated vector.
struct BlockLayout {
    int lat_off = 0, lon_off = 0, sog_off = 0, cog_off = 0;
    int lat_bins = 0, lon_bins = 0, sog_bins = 0, cog_bins = 0;
    int total = 0;

    BlockLayout() = default;
    explicit BlockLayout(const RoiConfig& roi)
        : lat_off(0), lon_off(roi.lat_bins), sog_off(roi.lat_bins + roi.lon_bins),
          cog_off(roi.lat_bins + roi.lon_bins + roi.sog_bins), lat_bins(roi.lat_bins),
          lon_bins(roi.lon_bins), sog_bins(roi.sog_bins), cog_bins(roi.cog_bins),
          total(roi.total_bins()) {}
};

/// Concatenated one-hot encoding of (lat, lon, sog, cog): exactly one set bit
/// per attribute block. Stored as the four bin indices; the dense bit vector
/// and the flat indices of the ones are both derivable.
struct FourHotVector {
    int lat_bin = 0, lon_bin = 0, sog_bin = 0, cog_bin = 0;

    /// Flat indices of the four set bits, in block order.
    std::array<int, 4> ones(const BlockLayout& l) const {
        return {l.lat_off + lat_bin, l.lon_off + lon_bin, l.sog_off + sog_bin,
                l.cog_off + cog_bin};
    }

    std::vector<std::uint8_t> bits(const BlockLayout& l) const;

    bool operator==(const FourHotVector&) const = default;
};

/// Equal-width bin index: floor((value-lo) * bins / (hi-lo)), clamped so the
/// closed upper boundary maps to the last bin.
int bin_index(double value, double lo, double hi, int bins);
double bin_center(int index, double lo, double hi, int bins);

/// Throws DomainError if the message lies outside the ROI or value bounds.
FourHotVector encode(const AisMessage& msg, const RoiConfig& roi);

struct Kinematics {
    double lat, lon, sog, cog;
};

/// Bin centers of each attribute block.
Kinematics decode(const FourHotVector& v, const RoiConfig& roi);

/// Validates a dense bit vector (exactly one 1 per block) and converts it.
/// Throws FormatError otherwise.
FourHotVector from_bits(std::span<const std::uint8_t> bits, const RoiConfig& roi);

/// Normalizes one attribute block to a categorical distribution and samples a
/// bin. Throws NumericError if the block has no positive mass.
int sample_block(std::span<const double> probs, Rng& rng);

/// Cell (i,j) counts timesteps whose lat bin is i and lon bin is j.
Tensor accumulate_image(std::span<const FourHotVector> track, const RoiConfig& roi);

}  // namespace aistk
