#include "nextloc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "nextloc/geo.hpp"

namespace nextloc {

namespace {

// 2012-01-02 00:00:00 UTC, a Monday; generated weeks start here.
constexpr int64_t kEpochBaseMonday = 1325462400;

// Roughly 1 hm of latitude in degrees (111.2 km per degree).
constexpr double kDegPerHm = 1.0 / 1112.0;

GeoPoint jittered(const GeoPoint& anchor, double jitter_hm, Rng& rng) {
  return GeoPoint{anchor.lat + rng.uniform(-jitter_hm, jitter_hm) * kDegPerHm,
                  anchor.lon + rng.uniform(-jitter_hm, jitter_hm) * kDegPerHm};
}

}  // namespace

void SynthConfig::validate() const {
  require(num_users >= 1 && weeks >= 1, "synth: need at least one user and one week");
  require(near_work_restaurants >= 1 && near_mall_restaurants >= 1,
          "synth: each restaurant cluster needs at least one member");
  require(noise_rate >= 0.0 && noise_rate <= 1.0, "synth: noise_rate must be in [0,1]");
  require(p_friday_fixed >= 0.0 && p_friday_fixed <= 1.0 && p_saturday_mall_set >= 0.0 &&
              p_saturday_mall_set <= 1.0,
          "synth: routine probabilities must be in [0,1]");
  require(gps_in_range(home) && gps_in_range(work) && gps_in_range(mall),
          "synth: anchor GPS out of range");
  // Non-adjacent by construction: the clusters must not be linkable by
  // nearest-neighbor aggregation.
  require(haversine_hm(work, mall) >= 100.0 + 2.0 * jitter_hm,
          "synth: restaurant clusters must be at least 10 km apart");
}

nlohmann::ordered_json SynthConfig::to_json() const {
  nlohmann::ordered_json j;
  j["num_users"] = num_users;
  j["weeks"] = weeks;
  j["near_work_restaurants"] = near_work_restaurants;
  j["near_mall_restaurants"] = near_mall_restaurants;
  j["filler_locations"] = filler_locations;
  j["jitter_hm"] = jitter_hm;
  j["p_friday_fixed"] = p_friday_fixed;
  j["p_saturday_mall_set"] = p_saturday_mall_set;
  j["noise_rate"] = noise_rate;
  j["seed"] = seed;
  j["end_at_saturday_dinner"] = end_at_saturday_dinner;
  return j;
}

SynthCatalog build_catalog(const SynthConfig& cfg) {
  cfg.validate();
  SynthCatalog cat;
  Rng rng(derive_seed(cfg.seed, 100));  // placement stream, separate from visits
  cat.gps.emplace_back();
  cat.gps.push_back(cfg.home);
  cat.gps.push_back(cfg.work);
  cat.gps.push_back(cfg.mall);
  cat.near_work_first = 4;
  for (int i = 0; i < cfg.near_work_restaurants; ++i)
    cat.gps.push_back(jittered(cfg.work, cfg.jitter_hm, rng));
  cat.near_mall_first = cat.near_work_first + cfg.near_work_restaurants;
  for (int i = 0; i < cfg.near_mall_restaurants; ++i)
    cat.gps.push_back(jittered(cfg.mall, cfg.jitter_hm, rng));
  cat.filler_first = cat.near_mall_first + cfg.near_mall_restaurants;
  for (int i = 0; i < cfg.filler_locations; ++i) {
    // Scatter fillers over a wide box around the anchors.
    GeoPoint p{rng.uniform(40.4, 41.2), rng.uniform(-74.3, -73.5)};
    cat.gps.push_back(p);
  }
  cat.count = static_cast<int32_t>(cat.gps.size()) - 1;
  return cat;
}

const std::vector<TemplateVisit>& weekly_template() {
  using K = TemplateVisit::Kind;
  static const std::vector<TemplateVisit> t = [] {
    std::vector<TemplateVisit> v;
    for (int day = 0; day < 5; ++day) {  // Monday..Friday
      v.push_back({day * 24 + 7, K::Home});
      v.push_back({day * 24 + 12, K::Work});
      if (day == 4) {
        v.push_back({day * 24 + 19, K::FridayDinner});
        v.push_back({day * 24 + 22, K::Home});
      } else {
        v.push_back({day * 24 + 20, K::Home});
      }
    }
    v.push_back({5 * 24 + 10, K::Mall});
    v.push_back({5 * 24 + 19, K::SaturdayDinner});
    v.push_back({5 * 24 + 22, K::Home});
    v.push_back({6 * 24 + 10, K::Home});
    v.push_back({6 * 24 + 21, K::Home});
    return v;
  }();
  return t;
}

int saturday_dinner_slot() { return 5 * 24 + 19; }
int friday_dinner_slot() { return 4 * 24 + 19; }

int64_t expected_checkins_per_user(const SynthConfig& cfg) {
  const int64_t per_week = static_cast<int64_t>(weekly_template().size());
  if (!cfg.end_at_saturday_dinner) return per_week * cfg.weeks;
  int64_t tail = 0;  // visits of the final week up to and including Saturday dinner
  for (const auto& visit : weekly_template()) {
    ++tail;
    if (visit.kind == TemplateVisit::Kind::SaturdayDinner) break;
  }
  return per_week * (cfg.weeks - 1) + tail;
}

namespace {

int32_t pick_template_location(const TemplateVisit& visit, const SynthCatalog& cat,
                               const SynthConfig& cfg, Rng& rng) {
  using K = TemplateVisit::Kind;
  switch (visit.kind) {
    case K::Home:
      return cat.home;
    case K::Work:
      return cat.work;
    case K::Mall:
      return cat.mall;
    case K::FridayDinner:
      if (rng.bernoulli(cfg.p_friday_fixed) || cfg.near_work_restaurants == 1)
        return cat.near_work_first;
      return cat.near_work_first + 1 +
             static_cast<int32_t>(rng.uniform_below(
                 static_cast<uint64_t>(cfg.near_work_restaurants - 1)));
    case K::SaturdayDinner:
      if (rng.bernoulli(cfg.p_saturday_mall_set))
        return cat.near_mall_first + static_cast<int32_t>(rng.uniform_below(
                                         static_cast<uint64_t>(cfg.near_mall_restaurants)));
      return 1 + static_cast<int32_t>(rng.uniform_below(static_cast<uint64_t>(cat.count)));
  }
  return cat.home;
}

}  // namespace

void generate(const SynthConfig& cfg, std::ostream& out) {
  SynthCatalog cat = build_catalog(cfg);
  char line[160];
  for (int u = 1; u <= cfg.num_users; ++u) {
    Rng rng(derive_seed(cfg.seed, 1000 + static_cast<uint64_t>(u)));
    for (int w = 0; w < cfg.weeks; ++w) {
      const bool final_week = w == cfg.weeks - 1;
      for (const auto& visit : weekly_template()) {
        int32_t loc = pick_template_location(visit, cat, cfg, rng);
        if (rng.bernoulli(cfg.noise_rate))
          loc = 1 + static_cast<int32_t>(rng.uniform_below(static_cast<uint64_t>(cat.count)));
        const int64_t ts = kEpochBaseMonday +
                           (static_cast<int64_t>(w) * 168 + visit.slot) * 3600 +
                           rng.uniform_int(0, 3599);
        const GeoPoint& g = cat.gps[static_cast<size_t>(loc)];
        std::snprintf(line, sizeof(line), "%d\t%d\t%.6f\t%.6f\t%lld\n", u, loc, g.lat, g.lon,
                      static_cast<long long>(ts));
        out << line;
        if (final_week && cfg.end_at_saturday_dinner &&
            visit.kind == TemplateVisit::Kind::SaturdayDinner)
          break;
      }
    }
  }
}

std::vector<double> oracle(int hour_slot, const SynthConfig& cfg) {
  cfg.validate();
  const int L = cfg.num_locations();
  const SynthCatalog cat = build_catalog(cfg);
  std::vector<double> tmpl(static_cast<size_t>(L) + 1, 0.0);

  const TemplateVisit* visit = nullptr;
  for (const auto& tv : weekly_template())
    if (tv.slot == hour_slot) visit = &tv;

  if (visit == nullptr) {
    // Outside the routine only noise visits occur: pure uniform prior.
    for (int32_t id = 1; id <= L; ++id) tmpl[static_cast<size_t>(id)] = 1.0 / L;
  } else {
    using K = TemplateVisit::Kind;
    switch (visit->kind) {
      case K::Home:
        tmpl[static_cast<size_t>(cat.home)] = 1.0;
        break;
      case K::Work:
        tmpl[static_cast<size_t>(cat.work)] = 1.0;
        break;
      case K::Mall:
        tmpl[static_cast<size_t>(cat.mall)] = 1.0;
        break;
      case K::FridayDinner: {
        tmpl[static_cast<size_t>(cat.near_work_first)] += cfg.p_friday_fixed;
        const double rest = 1.0 - cfg.p_friday_fixed;
        if (cfg.near_work_restaurants == 1) {
          tmpl[static_cast<size_t>(cat.near_work_first)] += rest;
        } else {
          for (int i = 1; i < cfg.near_work_restaurants; ++i)
            tmpl[static_cast<size_t>(cat.near_work_first + i)] +=
                rest / (cfg.near_work_restaurants - 1);
        }
        break;
      }
      case K::SaturdayDinner: {
        for (int i = 0; i < cfg.near_mall_restaurants; ++i)
          tmpl[static_cast<size_t>(cat.near_mall_first + i)] +=
              cfg.p_saturday_mall_set / cfg.near_mall_restaurants;
        const double rest = 1.0 - cfg.p_saturday_mall_set;
        for (int32_t id = 1; id <= L; ++id) tmpl[static_cast<size_t>(id)] += rest / L;
        break;
      }
    }
  }

  std::vector<double> out(static_cast<size_t>(L) + 1, 0.0);
  for (int32_t id = 1; id <= L; ++id)
    out[static_cast<size_t>(id)] =
        (1.0 - cfg.noise_rate) * tmpl[static_cast<size_t>(id)] + cfg.noise_rate / L;
  return out;
}

double bayes_recall_at_k(int hour_slot, int k, const SynthConfig& cfg) {
  std::vector<double> p = oracle(hour_slot, cfg);
  std::sort(p.begin() + 1, p.end(), std::greater<double>());
  double sum = 0.0;
  for (int i = 1; i <= k && i < static_cast<int>(p.size()); ++i) sum += p[static_cast<size_t>(i)];
  return sum;
}

}  // namespace nextloc
