#include "nextloc/ingest.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "nextloc/geo.hpp"

namespace nextloc {

ParseFormat parse_format(const std::string& descriptor, const std::string& delimiter) {
  ParseFormat fmt;
  std::stringstream ss(descriptor);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "user")
      fmt.fields.push_back(ParseFormat::Field::User);
    else if (tok == "loc")
      fmt.fields.push_back(ParseFormat::Field::Loc);
    else if (tok == "lat")
      fmt.fields.push_back(ParseFormat::Field::Lat);
    else if (tok == "lon")
      fmt.fields.push_back(ParseFormat::Field::Lon);
    else if (tok == "time")
      fmt.fields.push_back(ParseFormat::Field::Time);
    else if (tok == "skip" || tok == "_")
      fmt.fields.push_back(ParseFormat::Field::Skip);
    else
      fail("format: unknown field '" + tok + "' in descriptor '" + descriptor + "'");
  }
  auto has = [&](ParseFormat::Field f) {
    return std::count(fmt.fields.begin(), fmt.fields.end(), f) == 1;
  };
  require(has(ParseFormat::Field::User) && has(ParseFormat::Field::Loc) &&
              has(ParseFormat::Field::Lat) && has(ParseFormat::Field::Lon) &&
              has(ParseFormat::Field::Time),
          "format: descriptor must name user, loc, lat, lon, time exactly once: '" + descriptor +
              "'");
  if (delimiter == "tab")
    fmt.delimiter = '\t';
  else if (delimiter == "comma")
    fmt.delimiter = ',';
  else if (delimiter == "space")
    fmt.delimiter = ' ';
  else
    fail("format: delimiter must be tab, comma or space, got '" + delimiter + "'");
  return fmt;
}

ParsedData parse_checkins(std::istream& source, const ParseFormat& format) {
  require(static_cast<bool>(source), "ingest: unreadable source");
  ParsedData out;
  out.per_user.emplace_back();  // slot 0 unused
  out.stats.location_gps.emplace_back();

  std::unordered_map<std::string, int32_t> user_ids;
  std::unordered_map<std::string, int32_t> loc_ids;
  std::vector<std::string> cells;
  std::string line;
  while (std::getline(source, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    cells.clear();
    size_t start = 0;
    while (true) {
      size_t pos = line.find(format.delimiter, start);
      cells.push_back(line.substr(start, pos == std::string::npos ? pos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (cells.size() != format.fields.size()) {
      ++out.stats.skipped_lines;
      continue;
    }

    std::string user_key, loc_key;
    GeoPoint gps;
    int64_t ts = 0;
    bool ok = true;
    for (size_t i = 0; i < cells.size() && ok; ++i) {
      const std::string& cell = cells[i];
      switch (format.fields[i]) {
        case ParseFormat::Field::User:
          user_key = cell;
          ok = !cell.empty();
          break;
        case ParseFormat::Field::Loc:
          loc_key = cell;
          ok = !cell.empty();
          break;
        case ParseFormat::Field::Lat:
          try {
            gps.lat = std::stod(cell);
          } catch (...) {
            ok = false;
          }
          break;
        case ParseFormat::Field::Lon:
          try {
            gps.lon = std::stod(cell);
          } catch (...) {
            ok = false;
          }
          break;
        case ParseFormat::Field::Time: {
          auto parsed = parse_timestamp(cell);
          if (parsed)
            ts = *parsed;
          else
            ok = false;
          break;
        }
        case ParseFormat::Field::Skip:
          break;
      }
    }
    if (!ok || !gps_in_range(gps)) {
      ++out.stats.skipped_lines;
      continue;
    }

    auto [uit, new_user] = user_ids.emplace(user_key, static_cast<int32_t>(user_ids.size() + 1));
    if (new_user) out.per_user.emplace_back();
    auto [lit, new_loc] = loc_ids.emplace(loc_key, static_cast<int32_t>(loc_ids.size() + 1));
    if (new_loc) {
      out.stats.location_gps.push_back(gps);
    } else {
      const GeoPoint& first = out.stats.location_gps[static_cast<size_t>(lit->second)];
      if (first.lat != gps.lat || first.lon != gps.lon) {
        if (out.stats.gps_conflicts == 0)
          std::cerr << "ingest: location '" << loc_key
                    << "' seen with multiple GPS values; keeping the first\n";
        ++out.stats.gps_conflicts;
        gps = first;
      }
    }
    out.per_user[static_cast<size_t>(uit->second)].push_back(
        CheckIn{uit->second, lit->second, ts, gps});
    ++out.stats.num_checkins;
  }

  require(out.stats.num_checkins > 0, "ingest: no valid records");
  out.stats.num_users = static_cast<int32_t>(user_ids.size());
  out.stats.num_locations = static_cast<int32_t>(loc_ids.size());
  for (auto& traj : out.per_user)
    std::stable_sort(traj.begin(), traj.end(),
                     [](const CheckIn& a, const CheckIn& b) { return a.timestamp < b.timestamp; });
  return out;
}

TrajectorySequence pad_truncate(const std::vector<CheckIn>& input, int n) {
  require(n >= 1, "pad_truncate: n must be >= 1");
  TrajectorySequence seq;
  seq.entries.resize(static_cast<size_t>(n));
  const size_t len = input.size();
  const size_t keep = std::min(len, static_cast<size_t>(n));
  const size_t first = len - keep;  // most recent `keep` check-ins
  for (size_t i = 0; i < keep; ++i) seq.entries[i] = input[first + i];
  seq.valid_len = static_cast<int32_t>(keep);
  if (keep > 0) seq.user_id = seq.entries[0].user_id;
  return seq;
}

TrajectorySequence make_sequence(const std::vector<CheckIn>& trajectory, int prefix_len, int n) {
  require(prefix_len >= 1 && static_cast<size_t>(prefix_len) < trajectory.size(),
          "make_sequence: prefix length " + std::to_string(prefix_len) +
              " leaves no label in a trajectory of " + std::to_string(trajectory.size()));
  std::vector<CheckIn> prefix(trajectory.begin(), trajectory.begin() + prefix_len);
  TrajectorySequence seq = pad_truncate(prefix, n);
  seq.user_id = trajectory.front().user_id;
  const CheckIn& label = trajectory[static_cast<size_t>(prefix_len)];
  seq.label_location = label.location_id;
  seq.label_time = label.timestamp;
  return seq;
}

SplitResult split_user(const std::vector<CheckIn>& trajectory, int n) {
  const int m = static_cast<int>(trajectory.size());
  require(m >= 5, "split_user: need at least 5 check-ins, got " + std::to_string(m));
  SplitResult out;
  out.train.reserve(static_cast<size_t>(m - 3));
  for (int mp = 1; mp <= m - 3; ++mp) out.train.push_back(make_sequence(trajectory, mp, n));
  out.val = make_sequence(trajectory, m - 2, n);
  out.test = make_sequence(trajectory, m - 1, n);
  return out;
}

Dataset build_dataset(ParsedData&& parsed, int min_checkins) {
  Dataset ds;
  ds.stats = std::move(parsed.stats);
  ds.per_user = std::move(parsed.per_user);
  ds.min_checkins = min_checkins;
  for (size_t uid = 1; uid < ds.per_user.size(); ++uid) {
    const int m = static_cast<int>(ds.per_user[uid].size());
    if (m < min_checkins)
      ++ds.dropped_users;
    else
      ds.train_example_count += m - 3;
  }
  require(ds.dropped_users < ds.stats.num_users,
          "dataset: every user has fewer than " + std::to_string(min_checkins) + " check-ins");
  return ds;
}

std::vector<Dataset::ExampleRef> Dataset::train_refs(int max_per_user) const {
  std::vector<ExampleRef> refs;
  for (size_t uid = 1; uid < per_user.size(); ++uid) {
    if (!user_kept(static_cast<int32_t>(uid))) continue;
    const int m = static_cast<int>(per_user[uid].size());
    int first = 1;
    if (max_per_user > 0 && m - 3 > max_per_user) first = m - 3 - max_per_user + 1;
    for (int mp = first; mp <= m - 3; ++mp)
      refs.push_back({static_cast<int32_t>(uid), mp});
  }
  return refs;
}

std::vector<Dataset::ExampleRef> Dataset::val_refs() const {
  std::vector<ExampleRef> refs;
  for (size_t uid = 1; uid < per_user.size(); ++uid)
    if (user_kept(static_cast<int32_t>(uid)))
      refs.push_back({static_cast<int32_t>(uid), static_cast<int32_t>(per_user[uid].size()) - 2});
  return refs;
}

std::vector<Dataset::ExampleRef> Dataset::test_refs() const {
  std::vector<ExampleRef> refs;
  for (size_t uid = 1; uid < per_user.size(); ++uid)
    if (user_kept(static_cast<int32_t>(uid)))
      refs.push_back({static_cast<int32_t>(uid), static_cast<int32_t>(per_user[uid].size()) - 1});
  return refs;
}

TrajectorySequence Dataset::materialize(const ExampleRef& ref, int n) const {
  return make_sequence(per_user[static_cast<size_t>(ref.user)], ref.prefix_len, n);
}

namespace {

constexpr char kDataMagic[8] = {'N', 'L', 'O', 'C', 'D', 'A', 'T', 'A'};
constexpr uint32_t kDataVersion = 1;

template <typename T>
void wr(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T rd(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<bool>(is), "dataset: truncated file");
  return v;
}

}  // namespace

void Dataset::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), "dataset: cannot open for writing: " + path);
  os.write(kDataMagic, sizeof(kDataMagic));
  wr<uint32_t>(os, kDataVersion);
  wr<int32_t>(os, stats.num_users);
  wr<int32_t>(os, stats.num_locations);
  wr<int64_t>(os, stats.num_checkins);
  wr<int64_t>(os, stats.skipped_lines);
  wr<int64_t>(os, stats.gps_conflicts);
  wr<int32_t>(os, min_checkins);
  for (int32_t l = 1; l <= stats.num_locations; ++l) {
    wr<double>(os, stats.location_gps[static_cast<size_t>(l)].lat);
    wr<double>(os, stats.location_gps[static_cast<size_t>(l)].lon);
  }
  for (int32_t u = 1; u <= stats.num_users; ++u) {
    const auto& traj = per_user[static_cast<size_t>(u)];
    wr<int64_t>(os, static_cast<int64_t>(traj.size()));
    for (const CheckIn& c : traj) {
      wr<int32_t>(os, c.location_id);
      wr<int64_t>(os, c.timestamp);
    }
  }
  require(static_cast<bool>(os), "dataset: write failed: " + path);
}

Dataset Dataset::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "dataset: cannot open for reading: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  require(static_cast<bool>(is) && std::memcmp(magic, kDataMagic, sizeof(kDataMagic)) == 0,
          "dataset: bad magic in " + path);
  const uint32_t version = rd<uint32_t>(is);
  require(version == kDataVersion, "dataset: unsupported version " + std::to_string(version));
  ParsedData parsed;
  parsed.stats.num_users = rd<int32_t>(is);
  parsed.stats.num_locations = rd<int32_t>(is);
  parsed.stats.num_checkins = rd<int64_t>(is);
  parsed.stats.skipped_lines = rd<int64_t>(is);
  parsed.stats.gps_conflicts = rd<int64_t>(is);
  const int32_t min_checkins = rd<int32_t>(is);
  parsed.stats.location_gps.assign(static_cast<size_t>(parsed.stats.num_locations) + 1, {});
  for (int32_t l = 1; l <= parsed.stats.num_locations; ++l) {
    parsed.stats.location_gps[static_cast<size_t>(l)].lat = rd<double>(is);
    parsed.stats.location_gps[static_cast<size_t>(l)].lon = rd<double>(is);
  }
  parsed.per_user.assign(static_cast<size_t>(parsed.stats.num_users) + 1, {});
  for (int32_t u = 1; u <= parsed.stats.num_users; ++u) {
    const int64_t m = rd<int64_t>(is);
    auto& traj = parsed.per_user[static_cast<size_t>(u)];
    traj.resize(static_cast<size_t>(m));
    for (auto& c : traj) {
      c.user_id = u;
      c.location_id = rd<int32_t>(is);
      c.timestamp = rd<int64_t>(is);
      c.gps = parsed.stats.location_gps[static_cast<size_t>(c.location_id)];
    }
  }
  return build_dataset(std::move(parsed), min_checkins);
}

}  // namespace nextloc
