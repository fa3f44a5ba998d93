#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nextloc/rng.hpp"
#include "nextloc/types.hpp"

namespace nextloc {

// Weekly-routine generator: home mornings and nights, work on weekdays, a
// fixed near-work restaurant on Friday evening, the mall on Saturday morning
// and a uniformly random near-mall restaurant on Saturday evening. The two
// restaurant clusters sit far apart, so the Saturday-dinner signal is only
// reachable through the weekly timing of the visits, not through spatial
// neighborhood aggregation. Each visit is replaced by a uniformly random
// location with probability noise_rate.
struct SynthConfig {
  int num_users = 50;
  int weeks = 40;
  GeoPoint home{40.700, -74.000};
  GeoPoint work{40.750, -73.980};
  GeoPoint mall{40.900, -73.800};
  int near_work_restaurants = 3;  // the first one is the fixed Friday choice
  int near_mall_restaurants = 4;
  int filler_locations = 20;  // only ever visited as noise
  double jitter_hm = 3.0;     // cluster spread around each anchor
  double p_friday_fixed = 1.0;     // else another near-work restaurant
  double p_saturday_mall_set = 1.0;  // else a uniform location
  double noise_rate = 0.1;
  uint64_t seed = 1;
  bool end_at_saturday_dinner = true;  // stream stops at the final Saturday dinner

  int num_locations() const { return 3 + near_work_restaurants + near_mall_restaurants + filler_locations; }
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

// Location catalog with generator-assigned ids (1-based):
// 1 home, 2 work, 3 mall, then near-work, near-mall, filler.
struct SynthCatalog {
  std::vector<GeoPoint> gps;  // slot 0 unused
  int32_t home = 1, work = 2, mall = 3;
  int32_t near_work_first = 0, near_mall_first = 0, filler_first = 0;
  int32_t count = 0;

  bool is_near_mall(int32_t id, const SynthConfig& c) const {
    return id >= near_mall_first && id < near_mall_first + c.near_mall_restaurants;
  }
};

SynthCatalog build_catalog(const SynthConfig& cfg);

// Weekly hour slots (Monday 00:00 = 0) of the template, in visit order.
struct TemplateVisit {
  int slot = 0;  // [0, 168)
  enum class Kind { Home, Work, Mall, FridayDinner, SaturdayDinner } kind = Kind::Home;
};
const std::vector<TemplateVisit>& weekly_template();
int saturday_dinner_slot();
int friday_dinner_slot();

// Raw check-in lines in the ingest layout (user, loc, lat, lon, time),
// tab-delimited, epoch-second timestamps.
void generate(const SynthConfig& cfg, std::ostream& out);
int64_t expected_checkins_per_user(const SynthConfig& cfg);

// True conditional distribution of the next location given the weekly hour
// slot, indexed by catalog id (slot 0 of the vector unused). Slots outside
// the template fall back to the uniform noise prior.
std::vector<double> oracle(int hour_slot, const SynthConfig& cfg);

// Best achievable expected recall@k under the oracle: sum of the k largest
// conditional probabilities.
double bayes_recall_at_k(int hour_slot, int k, const SynthConfig& cfg);

}  // namespace nextloc
