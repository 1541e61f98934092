#include "aistk/fourhot.hpp"

#include <cmath>
#include <string>

#include "aistk/errors.hpp"

namespace aistk {

std::vector<std::uint8_t> FourHotVector::bits(const BlockLayout& l) const {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(l.total), 0);
    for (int i : ones(l)) out[static_cast<std::size_t>(i)] = 1;
    return out;
}

int bin_index(double value, double lo, double hi, int bins) {
    if (bins < 1) throw ShapeError("bin_index: bins must be >= 1");
    const int idx = static_cast<int>(std::floor((value - lo) * bins / (hi - lo)));
    return std::min(std::max(idx, 0), bins - 1);
}

double bin_center(int index, double lo, double hi, int bins) {
    return lo + (static_cast<double>(index) + 0.5) * (hi - lo) / bins;
}

FourHotVector encode(const AisMessage& msg, const RoiConfig& roi) {
    if (!roi.contains(msg.lat, msg.lon))
        throw DomainError("encode: position outside ROI");
    if (!(msg.sog >= 0.0) || msg.sog >= roi.sog_max)
        throw DomainError("encode: sog " + std::to_string(msg.sog) + " outside [0, sog_max)");
    if (!(msg.cog >= 0.0) || msg.cog >= 360.0)
        throw DomainError("encode: cog outside [0, 360)");
    FourHotVector v;
    v.lat_bin = bin_index(msg.lat, roi.lat_min, roi.lat_max, roi.lat_bins);
    v.lon_bin = bin_index(msg.lon, roi.lon_min, roi.lon_max, roi.lon_bins);
    v.sog_bin = bin_index(msg.sog, 0.0, roi.sog_max, roi.sog_bins);
    v.cog_bin = bin_index(msg.cog, 0.0, 360.0, roi.cog_bins);
    return v;
}

Kinematics decode(const FourHotVector& v, const RoiConfig& roi) {
    Kinematics k{};
    k.lat = bin_center(v.lat_bin, roi.lat_min, roi.lat_max, roi.lat_bins);
    k.lon = bin_center(v.lon_bin, roi.lon_min, roi.lon_max, roi.lon_bins);
    k.sog = bin_center(v.sog_bin, 0.0, roi.sog_max, roi.sog_bins);
    k.cog = bin_center(v.cog_bin, 0.0, 360.0, roi.cog_bins);
    return k;
}

FourHotVector from_bits(std::span<const std::uint8_t> bits, const RoiConfig& roi) {
    const BlockLayout l(roi);
    if (static_cast<int>(bits.size()) != l.total)
        throw FormatError("from_bits: expected " + std::to_string(l.total) + " bits, got " +
                          std::to_string(bits.size()));
    const int offs[4] = {l.lat_off, l.lon_off, l.sog_off, l.cog_off};
    const int lens[4] = {l.lat_bins, l.lon_bins, l.sog_bins, l.cog_bins};
    const char* names[4] = {"lat", "lon", "sog", "cog"};
    int idx[4];
    for (int b = 0; b < 4; ++b) {
        int found = -1;
        int count = 0;
        for (int i = 0; i < lens[b]; ++i) {
            if (bits[static_cast<std::size_t>(offs[b] + i)]) {
                found = i;
                ++count;
            }
        }
        if (count != 1)
            throw FormatError(std::string("from_bits: block '") + names[b] + "' has " +
                              std::to_string(count) + " set bits, expected exactly 1");
        idx[b] = found;
    }
    return FourHotVector{idx[0], idx[1], idx[2], idx[3]};
}

int sample_block(std::span<const double> probs, Rng& rng) {
    return static_cast<int>(rng.categorical(probs));
}

Tensor accumulate_image(std::span<const FourHotVector> track, const RoiConfig& roi) {
    Tensor img = Tensor::zeros({roi.lat_bins, roi.lon_bins});
    for (const FourHotVector& v : track) img.at(v.lat_bin, v.lon_bin) += 1.0;
    return img;
}

}  // namespace aistk
