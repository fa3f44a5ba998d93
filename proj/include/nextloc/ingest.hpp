#pragma once

#include <istream>
#include <string>
#include <vector>

#include "nextloc/types.hpp"

namespace nextloc {

// Field-order descriptor for raw check-in lines. The default layout is
// "user,loc,lat,lon,time"; any permutation works and "skip" (or "_") drops a
// column. Delimiter: "tab", "comma" or "space".
struct ParseFormat {
  enum class Field { User, Loc, Lat, Lon, Time, Skip };
  std::vector<Field> fields;
  char delimiter = '\t';
};

ParseFormat parse_format(const std::string& descriptor, const std::string& delimiter = "tab");

struct ParsedData {
  // per_user[uid] holds that user's check-ins sorted by timestamp (stable);
  // uid is a dense 1-based index in first-appearance order, slot 0 unused.
  std::vector<std::vector<CheckIn>> per_user;
  DatasetStats stats;
};

ParsedData parse_checkins(std::istream& source, const ParseFormat& format);

// Keeps the most recent n check-ins (or right-pads with zeros). Label fields
// are left unset; callers fill them.
TrajectorySequence pad_truncate(const std::vector<CheckIn>& input, int n);

struct SplitResult {
  std::vector<TrajectorySequence> train;  // prefix lengths 1..m-3
  TrajectorySequence val;                 // input: first m-2, label: check-in m-1
  TrajectorySequence test;                // input: first m-1, label: check-in m
};

// Leave-three-out split of one user's trajectory; requires m >= 5.
SplitResult split_user(const std::vector<CheckIn>& trajectory, int n);

// Builds the input sequence for prefix length m' (1-based label index m'+1).
TrajectorySequence make_sequence(const std::vector<CheckIn>& trajectory, int prefix_len, int n);

// Parsed data plus the split bookkeeping. Users with fewer than
// min_checkins visits are excluded from all splits but keep their ids.
struct Dataset {
  DatasetStats stats;
  std::vector<std::vector<CheckIn>> per_user;  // slot 0 unused
  int min_checkins = 5;
  int32_t dropped_users = 0;
  int64_t train_example_count = 0;  // sum over kept users of (m - 3)

  struct ExampleRef {
    int32_t user = 0;
    int32_t prefix_len = 0;
  };

  bool user_kept(int32_t uid) const {
    return static_cast<int>(per_user[static_cast<size_t>(uid)].size()) >= min_checkins;
  }
  // max_per_user > 0 keeps only the most recent prefixes of each user.
  std::vector<ExampleRef> train_refs(int max_per_user = 0) const;
  std::vector<ExampleRef> val_refs() const;
  std::vector<ExampleRef> test_refs() const;
  TrajectorySequence materialize(const ExampleRef& ref, int n) const;

  void save(const std::string& path) const;
  static Dataset load(const std::string& path);
};

Dataset build_dataset(ParsedData&& parsed, int min_checkins = 5);

}  // namespace nextloc
