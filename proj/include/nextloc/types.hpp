#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nextloc {

struct GeoPoint {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]
};

inline bool gps_in_range(const GeoPoint& p) {
  return p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

// One visit record. Ids are dense 1-based indices; 0 is reserved for padding.
struct CheckIn {
  int32_t user_id = 0;
  int32_t location_id = 0;
  int64_t timestamp = 0;  // seconds since Unix epoch, UTC
  GeoPoint gps{};
};

// A fixed-length, right-padded input sequence plus its prediction target.
struct TrajectorySequence {
  int32_t user_id = 0;
  std::vector<CheckIn> entries;  // size n; slots [valid_len, n) are all-zero
  int32_t valid_len = 0;
  int32_t label_location = 0;
  int64_t label_time = 0;
};

struct DatasetStats {
  int32_t num_users = 0;
  int32_t num_locations = 0;
  int64_t num_checkins = 0;
  std::vector<GeoPoint> location_gps;  // indexed by location id; slot 0 unused
  int64_t skipped_lines = 0;           // malformed or out-of-range input lines
  int64_t gps_conflicts = 0;           // locations seen with more than one GPS
};

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

}  // namespace nextloc
