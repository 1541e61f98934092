#pragma once

namespace aistk {

// Equirectangular plane anchored at a reference latitude: 1 degree of latitude
// is KM_PER_DEG km, longitude is scaled by cos(ref_lat). Adequate for the
// regional boxes this library works on.
inline constexpr double KM_PER_DEG = 111.32;
inline constexpr double KM_PER_NM = 1.852;

struct LocalFrame {
    double ref_lat_deg;
    double cos_ref;

    explicit LocalFrame(double ref_lat);

    double dlat_to_km(double dlat_deg) const { return dlat_deg * KM_PER_DEG; }
    double dlon_to_km(double dlon_deg) const { return dlon_deg * KM_PER_DEG * cos_ref; }
    double km_to_dlat(double km) const { return km / KM_PER_DEG; }
    double km_to_dlon(double km) const { return km / (KM_PER_DEG * cos_ref); }

    /// Planar distance in km between two lat/lon points.
    double distance_km(double lat_a, double lon_a, double lat_b, double lon_b) const;
};

/// Wraps an angle in degrees to [0, 360).
double wrap_deg(double deg);

/// Signed shortest difference b - a in degrees, result in (-180, 180].
double angle_diff_deg(double a, double b);

/// Interpolates along the shortest arc: a + alpha * (b - a), wrapped.
double circular_interp_deg(double a, double b, double alpha);

/// Course over ground (degrees clockwise from north) of the displacement from
/// point a to point b in the given frame.
double bearing_deg(const LocalFrame& f, double lat_a, double lon_a, double lat_b, double lon_b);

double knots_to_km_per_s(double knots);

}  // namespace aistk
