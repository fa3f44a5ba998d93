#include "nextloc/geo.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

namespace nextloc {

namespace {

constexpr double kEarthRadiusKm = 6371.0088;
constexpr double kPi = 3.14159265358979323846;

double to_rad(double deg) { return deg * kPi / 180.0; }

}  // namespace

double haversine_hm(const GeoPoint& a, const GeoPoint& b) {
  const double dlat = to_rad(b.lat - a.lat);
  const double dlon = to_rad(b.lon - a.lon);
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  double h = s1 * s1 + std::cos(to_rad(a.lat)) * std::cos(to_rad(b.lat)) * s2 * s2;
  if (h > 1.0) h = 1.0;  // guard rounding before the sqrt
  if (h < 0.0) h = 0.0;
  const double km = 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
  return km * 10.0;  // 1 km = 10 hm
}

int hour_of_week(int64_t t) {
  // Euclidean division so pre-1970 timestamps land in [0, 168) as well.
  int64_t days = t / 86400;
  int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  // 1970-01-01 was a Thursday; Monday-based day-of-week offset is 3.
  const int64_t dow = ((days + 3) % 7 + 7) % 7;
  return static_cast<int>(dow * 24 + rem / 3600);
}

std::optional<int64_t> parse_timestamp(const std::string& text) {
  if (text.empty()) return std::nullopt;
  bool all_int = true;
  for (size_t i = 0; i < text.size(); ++i) {
    if (!(std::isdigit(static_cast<unsigned char>(text[i])) || (i == 0 && text[i] == '-')))
      all_int = false;
  }
  if (all_int) {
    try {
      return std::stoll(text);
    } catch (...) {
      return std::nullopt;
    }
  }
  int y, mo, d, h, mi, s;
  char sep;
  if (std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &s) != 7)
    return std::nullopt;
  if (sep != 'T' && sep != ' ') return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 ||
      s > 60)
    return std::nullopt;
  // days-from-civil (proleptic Gregorian), exact for the full int range
  const int64_t yy = y - (mo <= 2 ? 1 : 0);
  const int64_t era = (yy >= 0 ? yy : yy - 399) / 400;
  const int64_t yoe = yy - era * 400;
  const int64_t doy = (153 * (mo + (mo > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  const int64_t days = era * 146097 + doe - 719468;
  return days * 86400 + h * 3600 + mi * 60 + s;
}

}  // namespace nextloc
