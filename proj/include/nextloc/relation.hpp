#pragma once

#include <memory>
#include <vector>

#include "nextloc/geo.hpp"
#include "nextloc/types.hpp"

namespace nextloc {

class Dataset;

// Pairwise intervals inside one trajectory: hours and hectometers, row-major
// n x n, symmetric with zero diagonal; entries touching padded slots are 0.
struct RelationMatrices {
  int n = 0;
  int valid_len = 0;
  std::vector<double> delta_t_hours;
  std::vector<double> delta_s_hm;

  double t(int i, int j) const { return delta_t_hours[static_cast<size_t>(i) * n + j]; }
  double s(int i, int j) const { return delta_s_hm[static_cast<size_t>(i) * n + j]; }
};

// Candidate-to-trajectory intervals, L x n. Every row of the temporal part is
// identical; padded columns are 0.
struct CandidateRelation {
  int num_candidates = 0;
  int n = 0;
  int valid_len = 0;
  std::vector<double> n_t_hours;
  std::vector<double> n_s_hm;

  double t(int i, int j) const { return n_t_hours[static_cast<size_t>(i) * n + j]; }
  double s(int i, int j) const { return n_s_hm[static_cast<size_t>(i) * n + j]; }
};

// Optional precomputed location-to-location distance table (hectometers).
// Worth it when L is small; candidate_relation falls back to direct haversine.
struct DistanceTable {
  int num_locations = 0;
  std::vector<double> d;  // (L+1) x (L+1), ids are 1-based

  static DistanceTable build(const std::vector<GeoPoint>& location_gps);
  double at(int32_t a, int32_t b) const {
    return d[static_cast<size_t>(a) * (num_locations + 1) + b];
  }
};

RelationMatrices trajectory_relation(const TrajectorySequence& seq);

CandidateRelation candidate_relation(const std::vector<GeoPoint>& location_gps,
                                     const TrajectorySequence& seq, int64_t target_time,
                                     const DistanceTable* table = nullptr);

// Interpolation anchors: extreme interval values observed on the training
// split. Out-of-range values at inference clamp into [min, max].
struct IntervalBounds {
  double t_min = 0, t_max = 0;
  double s_min = 0, s_max = 0;
};

IntervalBounds interval_bounds(const std::vector<TrajectorySequence>& train_sequences);

// Same bounds computed directly from a dataset's training prefixes without
// materializing every prefix window.
IntervalBounds compute_interval_bounds(const Dataset& dataset, int n);

}  // namespace nextloc
