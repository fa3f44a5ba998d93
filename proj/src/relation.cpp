#include "nextloc/relation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nextloc/ingest.hpp"

namespace nextloc {

namespace {

constexpr double kSecondsPerHour = 3600.0;

}  // namespace

DistanceTable DistanceTable::build(const std::vector<GeoPoint>& location_gps) {
  DistanceTable t;
  t.num_locations = static_cast<int>(location_gps.size()) - 1;
  const size_t stride = static_cast<size_t>(t.num_locations) + 1;
  t.d.assign(stride * stride, 0.0);
  for (int32_t a = 1; a <= t.num_locations; ++a)
    for (int32_t b = a + 1; b <= t.num_locations; ++b) {
      const double dist = haversine_hm(location_gps[static_cast<size_t>(a)],
                                       location_gps[static_cast<size_t>(b)]);
      t.d[static_cast<size_t>(a) * stride + b] = dist;
      t.d[static_cast<size_t>(b) * stride + a] = dist;
    }
  return t;
}

RelationMatrices trajectory_relation(const TrajectorySequence& seq) {
  RelationMatrices rel;
  rel.n = static_cast<int>(seq.entries.size());
  rel.valid_len = seq.valid_len;
  rel.delta_t_hours.assign(static_cast<size_t>(rel.n) * rel.n, 0.0);
  rel.delta_s_hm.assign(static_cast<size_t>(rel.n) * rel.n, 0.0);
  for (int i = 0; i < rel.valid_len; ++i) {
    for (int j = i + 1; j < rel.valid_len; ++j) {
      const double dt =
          std::fabs(static_cast<double>(seq.entries[static_cast<size_t>(i)].timestamp -
                                        seq.entries[static_cast<size_t>(j)].timestamp)) /
          kSecondsPerHour;
      const double dsp = haversine_hm(seq.entries[static_cast<size_t>(i)].gps,
                                      seq.entries[static_cast<size_t>(j)].gps);
      rel.delta_t_hours[static_cast<size_t>(i) * rel.n + j] = dt;
      rel.delta_t_hours[static_cast<size_t>(j) * rel.n + i] = dt;
      rel.delta_s_hm[static_cast<size_t>(i) * rel.n + j] = dsp;
      rel.delta_s_hm[static_cast<size_t>(j) * rel.n + i] = dsp;
    }
  }
  return rel;
}

CandidateRelation candidate_relation(const std::vector<GeoPoint>& location_gps,
                                     const TrajectorySequence& seq, int64_t target_time,
                                     const DistanceTable* table) {
  CandidateRelation rel;
  rel.num_candidates = static_cast<int>(location_gps.size()) - 1;
  require(rel.num_candidates >= 1, "candidate_relation: empty candidate set");
  rel.n = static_cast<int>(seq.entries.size());
  rel.valid_len = seq.valid_len;
  rel.n_t_hours.assign(static_cast<size_t>(rel.num_candidates) * rel.n, 0.0);
  rel.n_s_hm.assign(static_cast<size_t>(rel.num_candidates) * rel.n, 0.0);

  // Time intervals do not depend on the candidate; compute one row and copy.
  std::vector<double> trow(static_cast<size_t>(rel.n), 0.0);
  for (int j = 0; j < rel.valid_len; ++j)
    trow[static_cast<size_t>(j)] =
        std::fabs(static_cast<double>(target_time - seq.entries[static_cast<size_t>(j)].timestamp)) /
        kSecondsPerHour;
  for (int c = 0; c < rel.num_candidates; ++c)
    std::copy(trow.begin(), trow.end(),
              rel.n_t_hours.begin() + static_cast<size_t>(c) * rel.n);

  for (int c = 1; c <= rel.num_candidates; ++c) {
    double* row = rel.n_s_hm.data() + static_cast<size_t>(c - 1) * rel.n;
    for (int j = 0; j < rel.valid_len; ++j) {
      const CheckIn& e = seq.entries[static_cast<size_t>(j)];
      require(e.location_id >= 1 && e.location_id <= rel.num_candidates,
              "candidate_relation: check-in location " + std::to_string(e.location_id) +
                  " outside candidate set of size " + std::to_string(rel.num_candidates));
      row[j] = table ? table->at(c, e.location_id)
                     : haversine_hm(location_gps[static_cast<size_t>(c)], e.gps);
    }
  }
  return rel;
}

namespace {

struct BoundsAcc {
  double t_min = std::numeric_limits<double>::infinity();
  double t_max = -std::numeric_limits<double>::infinity();
  double s_min = std::numeric_limits<double>::infinity();
  double s_max = -std::numeric_limits<double>::infinity();
  bool any = false;

  void feed(double dt, double ds) {
    any = true;
    t_min = std::min(t_min, dt);
    t_max = std::max(t_max, dt);
    s_min = std::min(s_min, ds);
    s_max = std::max(s_max, ds);
  }

  IntervalBounds finish() const {
    require(any, "interval_bounds: no pair of valid check-ins in any training sequence");
    return IntervalBounds{t_min, t_max, s_min, s_max};
  }
};

}  // namespace

IntervalBounds interval_bounds(const std::vector<TrajectorySequence>& train_sequences) {
  BoundsAcc acc;
  for (const auto& seq : train_sequences) {
    if (seq.valid_len < 2) continue;
    RelationMatrices rel = trajectory_relation(seq);
    for (int i = 0; i < rel.valid_len; ++i)
      for (int j = 0; j < rel.valid_len; ++j)
        acc.feed(rel.t(i, j), rel.s(i, j));
  }
  return acc.finish();
}

IntervalBounds compute_interval_bounds(const Dataset& dataset, int n) {
  // The union of all training-prefix windows is exactly the pairs (i, j) with
  // max(i, j) <= m-4 and |i - j| <= n-1, diagonal included.
  BoundsAcc acc;
  for (size_t uid = 1; uid < dataset.per_user.size(); ++uid) {
    if (!dataset.user_kept(static_cast<int32_t>(uid))) continue;
    const auto& traj = dataset.per_user[uid];
    const int last = static_cast<int>(traj.size()) - 4;
    for (int j = 0; j <= last; ++j) {
      for (int i = std::max(0, j - n + 1); i <= j; ++i) {
        const double dt = std::fabs(static_cast<double>(traj[static_cast<size_t>(j)].timestamp -
                                                        traj[static_cast<size_t>(i)].timestamp)) /
                          kSecondsPerHour;
        const double ds =
            haversine_hm(traj[static_cast<size_t>(j)].gps, traj[static_cast<size_t>(i)].gps);
        acc.feed(dt, ds);
      }
    }
  }
  return acc.finish();
}

}  // namespace nextloc
