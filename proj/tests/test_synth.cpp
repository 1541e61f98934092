#include <cmath>
#include <sstream>

#include "aistk/errors.hpp"
#include "aistk/geo.hpp"
#include "aistk/synth/scenario.hpp"
#include "doctest.h"

using namespace aistk;
using namespace aistk::synth;

namespace {

Scenario base_scenario() {
    Scenario sc;
    sc.roi.lat_min = 50.0;
    sc.roi.lat_max = 50.42;
    sc.roi.lon_min = -5.0;
    sc.roi.lon_max = -4.36;
    sc.roi.finalize();
    sc.seed = 11;
    Route lane;
    lane.name = "lane";
    lane.waypoints = {{50.06, -4.95}, {50.06, -4.41}};
    sc.routes.push_back(lane);
    VesselClass c;
    c.name = "cargo";
    c.type = VesselType::cargo;
    c.routes = {"lane"};
    c.speed_min = 10.0;
    c.speed_max = 10.0;
    c.count = 1;
    sc.classes.push_back(c);
    return sc;
}

}  // namespace

TEST_CASE("noise-free straight route gives equally spaced collinear fixes") {
    Scenario sc = base_scenario();
    Track tr = generate_vessel(sc, sc.classes[0], 0);
    REQUIRE(tr.messages.size() == 144);
    LocalFrame frame(sc.roi.lat_center());
    double expected_km = knots_to_km_per_s(10.0) * 600;

    for (std::size_t i = 0; i < tr.messages.size(); ++i) {
        const auto& a = tr.messages[i];
        CHECK(a.lat == doctest::Approx(50.06).epsilon(1e-12));  // lane is a parallel of latitude
        CHECK(a.sog == doctest::Approx(10.0));
        CHECK(sc.roi.contains(a.lat, a.lon));
        if (i > 0) {
            CHECK(tr.messages[i].timestamp - tr.messages[i - 1].timestamp == 600);
            // Spacing is one step everywhere except where the vessel turns
            // around at a lane end, which shortens the chord.
            CHECK(frame.distance_km(tr.messages[i - 1].lat, tr.messages[i - 1].lon, a.lat, a.lon) <
                  expected_km + 1e-9);
        }
    }

    // A short run that stays clear of the lane ends is exactly uniform.
    sc.classes[0].duration_steps = 10;
    bool found_unfolded = false;
    for (int v = 0; v < 20 && !found_unfolded; ++v) {
        Track shortrun = generate_vessel(sc, sc.classes[0], v);
        bool uniform = true;
        for (std::size_t i = 1; i < shortrun.messages.size(); ++i) {
            double d = frame.distance_km(shortrun.messages[i - 1].lat, shortrun.messages[i - 1].lon,
                                         shortrun.messages[i].lat, shortrun.messages[i].lon);
            if (std::abs(d - expected_km) > 1e-9) uniform = false;
        }
        if (uniform) found_unfolded = true;
    }
    CHECK(found_unfolded);
}

TEST_CASE("dropout thins the track binomially") {
    Scenario sc = base_scenario();
    sc.noise.dropout = 0.5;
    sc.classes[0].count = 40;
    std::size_t total = 0;
    for (int i = 0; i < 40; ++i) total += generate_vessel(sc, sc.classes[0], i).messages.size();
    double mean = static_cast<double>(total) / 40.0;
    double sigma3 = 3.0 * std::sqrt(144 * 0.25 / 40.0);
    CHECK(std::abs(mean - 72.0) < sigma3);
}

TEST_CASE("same seed reproduces identical tracks") {
    Scenario sc = base_scenario();
    sc.noise = {0.3, 0.5, 3.0, 0.1};
    Track a = generate_vessel(sc, sc.classes[0], 0);
    Track b = generate_vessel(sc, sc.classes[0], 0);
    REQUIRE(a.messages.size() == b.messages.size());
    for (std::size_t i = 0; i < a.messages.size(); ++i) {
        CHECK(a.messages[i].timestamp == b.messages[i].timestamp);
        CHECK(a.messages[i].lat == b.messages[i].lat);
        CHECK(a.messages[i].lon == b.messages[i].lon);
        CHECK(a.messages[i].sog == b.messages[i].sog);
        CHECK(a.messages[i].cog == b.messages[i].cog);
    }
    Track c = generate_vessel(sc, sc.classes[0], 1);
    CHECK(c.messages.front().lat != a.messages.front().lat);
}

TEST_CASE("per-class speeds land in the configured band") {
    Scenario sc = base_scenario();
    sc.classes[0].speed_min = 12.0;
    sc.classes[0].speed_max = 15.0;
    sc.noise.sog_kn = 0.4;
    double lo = 1e9, hi = -1e9, sum = 0.0;
    int n = 0;
    for (int i = 0; i < 30; ++i)
        for (const auto& m : generate_vessel(sc, sc.classes[0], i).messages) {
            lo = std::min(lo, m.sog);
            hi = std::max(hi, m.sog);
            sum += m.sog;
            ++n;
        }
    CHECK(sum / n == doctest::Approx(13.5).epsilon(0.05));
    CHECK(lo > 12.0 - 5 * 0.4);
    CHECK(hi < 15.0 + 5 * 0.4);
}

TEST_CASE("loop class circles its center at the configured radius") {
    Scenario sc = base_scenario();
    VesselClass tug;
    tug.name = "tug";
    tug.type = VesselType::tug;
    tug.motion = Motion::loop;
    tug.center_lat = 50.2;
    tug.center_lon = -4.7;
    tug.radius_km = 2.5;
    tug.speed_min = 4.0;
    tug.speed_max = 4.0;
    tug.count = 1;
    sc.classes.push_back(tug);
    Track tr = generate_vessel(sc, sc.classes[1], 0);
    REQUIRE(tr.messages.size() == 144);
    LocalFrame frame(sc.roi.lat_center());
    for (const auto& m : tr.messages)
        CHECK(frame.distance_km(m.lat, m.lon, 50.2, -4.7) == doctest::Approx(2.5).epsilon(1e-6));
    CHECK(tr.label() == VesselType::tug);
}

TEST_CASE("translate_km shifts every fix perpendicular to the route heading") {
    Scenario sc = base_scenario();
    Track tr = generate_vessel(sc, sc.classes[0], 0);
    Track moved = inject_anomaly(tr, AnomalyKind::translate_km, 10.0);
    REQUIRE(moved.messages.size() == tr.messages.size());
    CHECK(moved.anomaly == "translate_km");
    CHECK(tr.anomaly.empty());

    LocalFrame frame(50.06);
    double heading = bearing_deg(frame, tr.messages.front().lat, tr.messages.front().lon,
                                 tr.messages.back().lat, tr.messages.back().lon);
    for (std::size_t i = 0; i < tr.messages.size(); ++i) {
        const auto& a = tr.messages[i];
        const auto& b = moved.messages[i];
        CHECK(frame.distance_km(a.lat, a.lon, b.lat, b.lon) == doctest::Approx(10.0).epsilon(1e-6));
        double shift_bearing = bearing_deg(frame, a.lat, a.lon, b.lat, b.lon);
        CHECK(std::abs(angle_diff_deg(heading + 90.0, shift_bearing)) < 1e-6);
        CHECK(b.sog == a.sog);
        CHECK(b.cog == a.cog);
    }
}

TEST_CASE("u_turn reverses the course for a 30-minute span at the midpoint") {
    Scenario sc = base_scenario();
    Track tr = generate_vessel(sc, sc.classes[0], 0);
    Track turned = inject_anomaly(tr, AnomalyKind::u_turn, 30.0);
    CHECK(turned.anomaly == "u_turn");
    const int n = static_cast<int>(tr.messages.size());
    const int mid = n / 2;
    LocalFrame frame(50.06);

    for (int t = 0; t <= mid; ++t) {
        CHECK(turned.messages[static_cast<std::size_t>(t)].lat == tr.messages[static_cast<std::size_t>(t)].lat);
        CHECK(turned.messages[static_cast<std::size_t>(t)].lon == tr.messages[static_cast<std::size_t>(t)].lon);
    }
    for (int j = 1; j <= 3; ++j) {
        const auto& back = turned.messages[static_cast<std::size_t>(mid + j)];
        const auto& ref = tr.messages[static_cast<std::size_t>(mid - j)];
        CHECK(frame.distance_km(back.lat, back.lon, ref.lat, ref.lon) < 1e-9);
    }
    for (int t = mid; t < mid + 3; ++t)
        CHECK(std::abs(angle_diff_deg(turned.messages[static_cast<std::size_t>(t)].cog,
                                      tr.messages[static_cast<std::size_t>(t)].cog + 180.0)) < 1e-9);
    CHECK(turned.messages[static_cast<std::size_t>(mid + 4)].cog ==
          tr.messages[static_cast<std::size_t>(mid + 4)].cog);
}

TEST_CASE("speed_spike raises sog and stretches motion over the spike span") {
    Scenario sc = base_scenario();
    Track tr = generate_vessel(sc, sc.classes[0], 0);
    Track fast = inject_anomaly(tr, AnomalyKind::speed_spike, 8.0);
    CHECK(fast.anomaly == "speed_spike");
    const int n = static_cast<int>(tr.messages.size());
    const int mid = n / 2;
    LocalFrame frame(50.06);
    CHECK(fast.messages[static_cast<std::size_t>(mid)].sog == doctest::Approx(18.0));
    CHECK(fast.messages[0].sog == doctest::Approx(10.0));
    double base = frame.distance_km(tr.messages[static_cast<std::size_t>(mid)].lat,
                                    tr.messages[static_cast<std::size_t>(mid)].lon,
                                    tr.messages[static_cast<std::size_t>(mid) + 1].lat,
                                    tr.messages[static_cast<std::size_t>(mid) + 1].lon);
    double spiked = frame.distance_km(fast.messages[static_cast<std::size_t>(mid)].lat,
                                      fast.messages[static_cast<std::size_t>(mid)].lon,
                                      fast.messages[static_cast<std::size_t>(mid) + 1].lat,
                                      fast.messages[static_cast<std::size_t>(mid) + 1].lon);
    CHECK(spiked == doctest::Approx(base * 1.8).epsilon(1e-6));
}

TEST_CASE("zone_swap moves the centroid toward the target; magnitude 0 is the identity") {
    Scenario sc = base_scenario();
    Track tr = generate_vessel(sc, sc.classes[0], 0);
    Track swapped = inject_anomaly(tr, AnomalyKind::zone_swap, 1.0, {{50.3, -4.5}});
    double clat = 0.0, clon = 0.0;
    for (const auto& m : swapped.messages) {
        clat += m.lat;
        clon += m.lon;
    }
    clat /= static_cast<double>(swapped.messages.size());
    clon /= static_cast<double>(swapped.messages.size());
    CHECK(clat == doctest::Approx(50.3).epsilon(1e-9));
    CHECK(clon == doctest::Approx(-4.5).epsilon(1e-9));
    CHECK_THROWS_AS(inject_anomaly(tr, AnomalyKind::zone_swap, 1.0), DomainError);

    for (AnomalyKind kind : {AnomalyKind::translate_km, AnomalyKind::u_turn,
                             AnomalyKind::speed_spike, AnomalyKind::zone_swap}) {
        Track same = inject_anomaly(tr, kind, 0.0, {{50.3, -4.5}});
        CHECK(same.anomaly.empty());
        REQUIRE(same.messages.size() == tr.messages.size());
        for (std::size_t i = 0; i < tr.messages.size(); ++i) {
            CHECK(same.messages[i].lat == tr.messages[i].lat);
            CHECK(same.messages[i].lon == tr.messages[i].lon);
            CHECK(same.messages[i].sog == tr.messages[i].sog);
            CHECK(same.messages[i].cog == tr.messages[i].cog);
        }
    }
}

TEST_CASE("scenario files parse into the same tracks and reject bad geometry") {
    std::string text = R"(# two-class demo
[roi]
lat_min = 50.0
lat_max = 50.42
lon_min = -5.0
lon_max = -4.36

[sim]
seed = 11

[noise]
pos_km = 0.2
dropout = 0.02

[route lane]
waypoints = 50.06,-4.95 50.06,-4.41

[class cargo]
type = cargo
routes = lane
speed_min = 9
speed_max = 13
count = 3

[class tug]
type = tug
motion = loop
center = 50.2,-4.7
radius_km = 2
speed_min = 3
speed_max = 5
count = 2
)";
    std::istringstream in(text);
    Scenario sc = parse_scenario(parse_config(in));
    CHECK(sc.seed == 11);
    CHECK(sc.routes.size() == 1);
    CHECK(sc.classes.size() == 2);
    std::vector<Track> tracks = generate(sc);
    CHECK(tracks.size() == 5);
    CHECK(tracks[0].label() == VesselType::cargo);
    CHECK(tracks[4].label() == VesselType::tug);
    std::vector<Track> again = generate(sc);
    CHECK(again[2].messages.size() == tracks[2].messages.size());
    CHECK(again[2].messages[5].lat == tracks[2].messages[5].lat);

    auto parse = [](const std::string& s) {
        std::istringstream is(s);
        return parse_scenario(parse_config(is));
    };
    std::string roi = "[roi]\nlat_min = 50.0\nlat_max = 50.42\nlon_min = -5.0\nlon_max = -4.36\n";
    CHECK_THROWS_AS(parse(roi + "[route bad]\nwaypoints = 50.1,-4.9 51.5,-4.9\n"), ConfigError);
    CHECK_THROWS_AS(parse(roi + "[route lane]\nwaypoints = 50.1,-4.9 50.2,-4.9\nspeed = 4\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse(roi + "[class c]\ntype = cargo\nroutes = nope\nspeed_min = 4\nspeed_max = 5\ncount = 1\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse(roi + "[turbo]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("lat_min = 50.0\n"), ConfigError);
    std::istringstream dup("[roi]\nlat_min = 1\nlat_min = 2\n");
    CHECK_THROWS_AS(parse_config(dup), ConfigError);
}
