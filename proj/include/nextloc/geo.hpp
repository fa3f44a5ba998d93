#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nextloc/types.hpp"

namespace nextloc {

// Great-circle distance in hectometers (100 m units) on a sphere of radius
// 6371.0088 km (IUGG mean earth radius).
double haversine_hm(const GeoPoint& a, const GeoPoint& b);

// Weekly hour slot in [0, 168), UTC, week starting Monday 00:00.
int hour_of_week(int64_t epoch_seconds);

// Accepts integer epoch seconds or an RFC-3339-like UTC stamp
// ("YYYY-MM-DDTHH:MM:SS" with optional trailing 'Z', 'T' may be a space).
std::optional<int64_t> parse_timestamp(const std::string& text);

}  // namespace nextloc
