#include <doctest.h>

#include <cmath>
#include <sstream>

#include "aistk/ais/ingest.hpp"
#include "aistk/errors.hpp"
#include "aistk/fourhot.hpp"
#include "aistk/geo.hpp"
#include "aistk/rng.hpp"

using namespace aistk;

namespace {

RoiConfig test_roi() {
  RoiConfig roi;
  roi.lat_min = 50.0;
  roi.lat_max = 52.0;
  roi.lon_min = -6.0;
  roi.lon_max = -4.0;
  roi.finalize();
  return roi;
}

AisMessage msg(std::int64_t mmsi, std::int64_t t, double lat, double lon,
               double sog = 10.0, double cog = 90.0) {
  AisMessage m;
  m.mmsi = mmsi;
  m.timestamp = t;
  m.lat = lat;
  m.lon = lon;
  m.sog = sog;
  m.cog = cog;
  return m;
}

}  // namespace

TEST_CASE("roi bin derivation from the default resolutions") {
  RoiConfig roi = test_roi();
  // 2 degrees of latitude = 222.64 km at ~1 km per bin.
  CHECK(roi.lat_bins == 223);
  // 2 degrees of longitude scaled by cos(51 deg).
  const double width_km = 2.0 * KM_PER_DEG * std::cos(51.0 * std::numbers::pi / 180.0);
  CHECK(roi.lon_bins == int(std::ceil(width_km)));
  CHECK(roi.sog_bins == 30);
  CHECK(roi.cog_bins == 72);
  CHECK(roi.total_bins() == roi.lat_bins + roi.lon_bins + 102);
}

TEST_CASE("csv parse spec cases") {
  IngestStats stats;
  std::istringstream in(
      "mmsi,timestamp,lat,lon,sog,cog,vessel_type\n"
      "123,1600000000,47.5,-5.2,12.0,90.0,cargo\n"
      "124,1600000000,47.5,abc,12.0,90.0,\n");
  auto msgs = parse_csv(in, &stats);
  REQUIRE(msgs.size() == 1);
  CHECK(msgs[0].mmsi == 123);
  CHECK(msgs[0].timestamp == 1600000000);
  CHECK(msgs[0].lat == 47.5);
  CHECK(msgs[0].lon == -5.2);
  CHECK(msgs[0].sog == 12.0);
  CHECK(msgs[0].cog == 90.0);
  CHECK(msgs[0].vessel_type == VesselType::cargo);
  CHECK(stats.rows_malformed == 1);

  std::istringstream empty("mmsi,timestamp,lat,lon,sog,cog,vessel_type\n");
  CHECK(parse_csv(empty).empty());

  std::istringstream bad_header("time,lat\n");
  CHECK_THROWS_AS((void)parse_csv(bad_header), FormatError);
}

TEST_CASE("validate drops out-of-bounds messages") {
  RoiConfig roi = test_roi();
  IngestStats stats;
  std::vector<AisMessage> msgs = {
      msg(1, 1000, 51.0, -5.0, 45.0, 90.0),   // sog over the cap
      msg(1, 1000, 55.0, -5.0, 10.0, 90.0),   // latitude outside
      msg(1, 1000, 51.0, -5.0, 10.0, 360.0),  // cog out of range
      msg(1, 1000, 51.0, -5.0, 10.0, 90.0),   // fine
  };
  auto kept = validate(msgs, roi, &stats);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].sog == 10.0);
  CHECK(stats.dropped_bad_sog == 1);
  CHECK(stats.dropped_out_of_roi == 1);
  CHECK(stats.dropped_bad_cog == 1);
}

TEST_CASE("build_tracks splits a 30h run into 24h + 6h") {
  std::vector<AisMessage> msgs;
  for (int i = 0; i <= 30 * 6; ++i)  // one message every 10 minutes for 30 h
    msgs.push_back(msg(7, 1000000 + std::int64_t(i) * 600, 51.0, -5.0));
  auto tracks = build_tracks(msgs);
  REQUIRE(tracks.size() == 2);
  CHECK(tracks[0].duration_s() == 24 * 3600);
  CHECK(tracks[1].duration_s() == 30 * 3600 - 24 * 3600 - 600);
  CHECK(tracks[0].id == "7_0");
  CHECK(tracks[1].id == "7_1");
}

TEST_CASE("build_tracks discards sub-4h pieces and separates vessels") {
  std::vector<AisMessage> msgs;
  for (int i = 0; i <= 18; ++i)  // 3 h of data
    msgs.push_back(msg(9, 5000 + std::int64_t(i) * 600, 51.0, -5.0));
  CHECK(build_tracks(msgs).empty());

  std::vector<AisMessage> two;
  for (int i = 0; i <= 5 * 6; ++i) {
    two.push_back(msg(1, 1000 + std::int64_t(i) * 600, 51.0, -5.0));
    two.push_back(msg(2, 1000 + std::int64_t(i) * 600, 51.2, -5.2));
  }
  auto tracks = build_tracks(two);
  REQUIRE(tracks.size() == 2);
  CHECK(tracks[0].mmsi == 1);
  CHECK(tracks[1].mmsi == 2);
}

TEST_CASE("build_tracks splits on gaps over two hours and dedupes") {
  std::vector<AisMessage> msgs;
  for (int i = 0; i <= 5 * 6; ++i)
    msgs.push_back(msg(3, 1000 + std::int64_t(i) * 600, 51.0, -5.0));
  msgs.push_back(msgs.back());  // duplicate timestamp
  for (int i = 0; i <= 5 * 6; ++i)
    msgs.push_back(msg(3, 1000 + 5 * 3600 + 3 * 3600 + std::int64_t(i) * 600, 51.0, -5.0));
  auto tracks = build_tracks(msgs);
  REQUIRE(tracks.size() == 2);
  CHECK(tracks[0].messages.size() == 31);
  CHECK(tracks[1].messages.size() == 31);
}

TEST_CASE("remove_stationary applies the 80 percent rule strictly") {
  Track slow;
  slow.mmsi = 1;
  for (int i = 0; i < 100; ++i)
    slow.messages.push_back(msg(1, 1000 + i * 600, 51.0, -5.0, i < 85 ? 0.05 : 5.0));
  Track half;
  half.mmsi = 2;
  for (int i = 0; i < 100; ++i)
    half.messages.push_back(msg(2, 1000 + i * 600, 51.0, -5.0, i < 50 ? 0.05 : 5.0));
  Track moving;
  moving.mmsi = 3;
  for (int i = 0; i < 100; ++i)
    moving.messages.push_back(msg(3, 1000 + i * 600, 51.0, -5.0, 5.0));

  auto kept = remove_stationary({slow, half, moving});
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].mmsi == 2);
  CHECK(kept[1].mmsi == 3);
}

TEST_CASE("resample_train midpoint and gap rejection") {
  RoiConfig roi = test_roi();
  Track t;
  t.mmsi = 4;
  t.messages = {msg(4, 0, 51.0, -5.0, 10.0, 350.0),
                msg(4, 1200, 51.2, -5.2, 14.0, 10.0)};
  // Pad the ends so the duration checks stay out of the way of this test.
  auto r = resample_train(t, roi);
  REQUIRE(r.has_value());
  REQUIRE(r->messages.size() == 3);
  const AisMessage& mid = r->messages[1];
  CHECK(mid.timestamp == 600);
  CHECK(mid.lat == doctest::Approx(51.1));
  CHECK(mid.lon == doctest::Approx(-5.1));
  CHECK(mid.sog == doctest::Approx(12.0));
  CHECK(mid.cog == doctest::Approx(0.0).epsilon(1e-9));

  Track gap;
  gap.mmsi = 5;
  gap.messages = {msg(5, 0, 51.0, -5.0), msg(5, 3700, 51.1, -5.1)};
  CHECK(!resample_train(gap, roi).has_value());
}

TEST_CASE("grid construction") {
  RoiConfig roi = test_roi();
  Track t;
  t.mmsi = 6;
  t.messages = {msg(6, 0, 51.0, -5.0), msg(6, 600, 51.01, -5.0),
                msg(6, 1800, 51.03, -5.0)};
  auto grid = to_grid(t, roi);
  REQUIRE(grid.size() == 4);
  CHECK(grid.observed(0));
  CHECK(grid.observed(1));
  CHECK(!grid.observed(2));
  CHECK(grid.observed(3));
  CHECK(grid.observed_count() == 3);
  CHECK(grid.time_at(2) == 1200);

  auto exact = grid_from_regular(t, roi);
  REQUIRE(exact.size() == 4);
  Track off;
  off.mmsi = 7;
  off.messages = {msg(7, 0, 51.0, -5.0), msg(7, 601, 51.0, -5.0)};
  CHECK_THROWS_AS((void)grid_from_regular(off, roi), FormatError);
}

TEST_CASE("four-hot binning follows the floor rule") {
  RoiConfig roi = test_roi();
  CHECK(bin_index(roi.lat_min, roi.lat_min, roi.lat_max, roi.lat_bins) == 0);
  CHECK(bin_index(359.9, 0.0, 360.0, 72) == 71);
  CHECK(bin_index(12.0, 0.0, 30.0, 30) == 12);
  // Closed upper boundary maps into the last bin.
  CHECK(bin_index(roi.lat_max, roi.lat_min, roi.lat_max, roi.lat_bins) == roi.lat_bins - 1);

  AisMessage m = msg(1, 0, roi.lat_min, -5.0, 12.0, 359.9);
  auto v = encode(m, roi);
  CHECK(v.lat_bin == 0);
  CHECK(v.sog_bin == 12);
  CHECK(v.cog_bin == 71);

  AisMessage out = msg(1, 0, 49.0, -5.0);
  CHECK_THROWS_AS((void)encode(out, roi), DomainError);
}

TEST_CASE("four-hot decode round trip and bin centers") {
  RoiConfig roi = test_roi();
  AisMessage m = msg(1, 0, 50.73, -4.21, 7.3, 123.0);
  auto v = encode(m, roi);
  auto k = decode(v, roi);
  CHECK(std::abs(k.lat - m.lat) <= 0.5 * (roi.lat_max - roi.lat_min) / roi.lat_bins);
  CHECK(std::abs(k.lon - m.lon) <= 0.5 * (roi.lon_max - roi.lon_min) / roi.lon_bins);
  CHECK(std::abs(k.sog - m.sog) <= 0.5 * roi.sog_max / roi.sog_bins);
  CHECK(std::abs(k.cog - m.cog) <= 0.5 * 360.0 / roi.cog_bins);

  FourHotVector sog0;
  sog0.sog_bin = 0;
  CHECK(decode(sog0, roi).sog == doctest::Approx(0.5));

  // Two set bits in one block must not validate.
  BlockLayout l(roi);
  std::vector<std::uint8_t> bits(size_t(l.total), 0);
  bits[0] = 1;
  bits[1] = 1;
  bits[size_t(l.lon_off)] = 1;
  bits[size_t(l.sog_off)] = 1;
  bits[size_t(l.cog_off)] = 1;
  CHECK_THROWS_AS((void)from_bits(bits, roi), FormatError);
}

TEST_CASE("four-hot bit vector has exactly four ones") {
  RoiConfig roi = test_roi();
  AisMessage m = msg(1, 0, 51.5, -4.5, 20.0, 271.0);
  auto v = encode(m, roi);
  auto bits = v.bits(BlockLayout(roi));
  int count = 0;
  for (auto b : bits) count += b;
  CHECK(count == 4);
  CHECK(from_bits(bits, roi) == v);
}

TEST_CASE("sample_block statistics") {
  Rng rng(21);
  std::vector<double> onehot(8, 0.0);
  onehot[5] = 1.0;
  for (int i = 0; i < 32; ++i) CHECK(sample_block(onehot, rng) == 5);

  std::vector<double> uniform(10, 1.0);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[size_t(sample_block(uniform, rng))];
  const double p = 0.1;
  for (int c : counts)
    CHECK(std::abs(c / double(n) - p) < 3.0 * std::sqrt(p * (1 - p) / n));

  std::vector<double> skew = {0.2, 0.8};
  int ones = 0;
  for (int i = 0; i < n; ++i) ones += sample_block(skew, rng);
  CHECK(ones / double(n) == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("accumulate_image counts timesteps per cell") {
  RoiConfig roi;
  roi.lat_min = 50.0;
  roi.lat_max = 50.1;
  roi.lon_min = -5.0;
  roi.lon_max = -4.9;
  roi.finalize();

  std::vector<FourHotVector> one = {encode(msg(1, 0, 50.05, -4.95), roi)};
  auto img = accumulate_image(one, roi);
  double total = 0.0;
  for (double v : img.data) total += v;
  CHECK(total == 1.0);

  // Straight diagonal: active cells advance monotonically in both axes.
  std::vector<FourHotVector> diag;
  const int steps = 9;
  for (int i = 0; i < steps; ++i) {
    double f = (i + 0.5) / steps;
    diag.push_back(encode(msg(1, i, 50.0 + 0.1 * f, -5.0 + 0.1 * f), roi));
  }
  auto img2 = accumulate_image(diag, roi);
  total = 0.0;
  for (double v : img2.data) total += v;
  CHECK(total == steps);
  int prev_lat = -1, prev_lon = -1;
  for (const auto& v : diag) {
    CHECK(v.lat_bin >= prev_lat);
    CHECK(v.lon_bin >= prev_lon);
    prev_lat = v.lat_bin;
    prev_lon = v.lon_bin;
  }
}
