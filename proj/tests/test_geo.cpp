#include <doctest.h>

#include <cmath>

#include "nextloc/geo.hpp"
#include "nextloc/rng.hpp"

using namespace nextloc;

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kRadiusHm = 63710.088;  // 6371.0088 km in hectometers
}  // namespace

TEST_CASE("haversine of identical points is zero") {
  CHECK(haversine_hm({0, 0}, {0, 0}) == 0.0);
  CHECK(haversine_hm({40.7, -74.0}, {40.7, -74.0}) == 0.0);
}

TEST_CASE("haversine quarter and half great circle") {
  // Independent closed forms: pi*R/2 and pi*R on the equator.
  CHECK(haversine_hm({0, 0}, {0, 90}) == doctest::Approx(kPi * kRadiusHm / 2.0).epsilon(1e-9));
  CHECK(haversine_hm({0, 0}, {0, 180}) == doctest::Approx(kPi * kRadiusHm).epsilon(1e-9));
  // Magnitude anchors, good to about a hectometer.
  CHECK(std::fabs(haversine_hm({0, 0}, {0, 90}) - 100075.4) < 1.0);
  CHECK(std::fabs(haversine_hm({0, 0}, {0, 180}) - 200150.9) < 1.0);
}

TEST_CASE("haversine is exactly symmetric and obeys the triangle inequality") {
  Rng rng(99);
  for (int t = 0; t < 200; ++t) {
    GeoPoint a{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    GeoPoint b{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    GeoPoint c{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    CHECK(haversine_hm(a, b) == haversine_hm(b, a));
    const double ab = haversine_hm(a, b), bc = haversine_hm(b, c), ac = haversine_hm(a, c);
    CHECK(ac <= ab + bc + 1e-9 * std::max(1.0, ab + bc));
  }
}

TEST_CASE("hour_of_week basics") {
  CHECK(hour_of_week(0) == 72);       // epoch 0 is Thursday 00:00 UTC
  CHECK(hour_of_week(3600) == 73);    // one hour later
  CHECK(hour_of_week(3 * 86400 + 23 * 3600) == 167);          // Sunday 23:00
  CHECK(hour_of_week(3 * 86400 + 23 * 3600 + 3599) == 167);   // Sunday 23:59:59
  CHECK(hour_of_week(4 * 86400) == 0);                        // Monday 00:00
  CHECK(hour_of_week(-3600) == 71);   // pre-epoch wraps cleanly
}

TEST_CASE("timestamp parsing") {
  CHECK(parse_timestamp("0") == 0);
  CHECK(parse_timestamp("1325462400") == 1325462400);
  CHECK(parse_timestamp("-86400") == -86400);
  CHECK(parse_timestamp("1970-01-01T00:00:00Z") == 0);
  CHECK(parse_timestamp("1970-01-02 00:00:00") == 86400);
  CHECK(parse_timestamp("2012-01-02T00:00:00Z") == 1325462400);
  CHECK(parse_timestamp("2010-10-19T23:55:27Z") == 1287532527);
  CHECK_FALSE(parse_timestamp("not-a-time").has_value());
  CHECK_FALSE(parse_timestamp("2012-13-01T00:00:00Z").has_value());
  CHECK_FALSE(parse_timestamp("").has_value());
}
