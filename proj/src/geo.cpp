#include "aistk/geo.hpp"

#include <cmath>
#include <numbers>

namespace aistk {

LocalFrame::LocalFrame(double ref_lat)
    : ref_lat_deg(ref_lat), cos_ref(std::cos(ref_lat * std::numbers::pi / 180.0)) {}

double LocalFrame::distance_km(double lat_a, double lon_a, double lat_b, double lon_b) const {
    const double dy = dlat_to_km(lat_b - lat_a);
    const double dx = dlon_to_km(lon_b - lon_a);
    return std::sqrt(dx * dx + dy * dy);
}

double wrap_deg(double deg) {
    double w = std::fmod(deg, 360.0);
    if (w < 0.0) w += 360.0;
    // fmod can return 360.0 - tiny which rounds to 360.0 after the add
    if (w >= 360.0) w = 0.0;
    return w;
}

double angle_diff_deg(double a, double b) {
    double d = std::fmod(b - a, 360.0);
    if (d > 180.0) d -= 360.0;
    if (d <= -180.0) d += 360.0;
    return d;
}

double circular_interp_deg(double a, double b, double alpha) {
    return wrap_deg(a + alpha * angle_diff_deg(a, b));
}

double bearing_deg(const LocalFrame& f, double lat_a, double lon_a, double lat_b, double lon_b) {
    const double dy = f.dlat_to_km(lat_b - lat_a);  // north
    const double dx = f.dlon_to_km(lon_b - lon_a);  // east
    const double rad = std::atan2(dx, dy);
    return wrap_deg(rad * 180.0 / std::numbers::pi);
}

double knots_to_km_per_s(double knots) { return knots * KM_PER_NM / 3600.0; }

}  // namespace aistk
