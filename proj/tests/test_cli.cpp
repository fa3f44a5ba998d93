#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nextloc/cli.hpp"
#include "nextloc/ingest.hpp"
#include "nextloc/synth.hpp"

namespace fs = std::filesystem;
using namespace nextloc;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<fs::path> run_dirs(const fs::path& root) {
  std::vector<fs::path> dirs;
  if (!fs::exists(root)) return dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

nlohmann::ordered_json load_json(const fs::path& p) {
  std::ifstream is(p);
  REQUIRE(is.good());
  return nlohmann::ordered_json::parse(is);
}

}  // namespace

TEST_CASE("cli: missing input file exits with code 2") {
  CHECK(run_cli({"ingest", "--raw", "/nonexistent/file.txt", "--out", "x.bin"}) == 2);
  CHECK(run_cli({"stats", "--dataset", "/nonexistent/data.bin"}) == 2);
}

TEST_CASE("cli: unknown flags and missing subcommand fail") {
  CHECK(run_cli({"train"}) != 0);               // missing --dataset
  CHECK(run_cli({"frobnicate"}) != 0);
  CHECK(run_cli({}) != 0);
}

TEST_CASE("cli: synth -> ingest -> stats pipeline") {
  TempDir tmp("nextloc_cli_pipeline");
  const std::string raw = tmp.file("raw.txt");
  const std::string data = tmp.file("data.bin");
  CHECK(run_cli({"synth", "--out", raw, "--users", "4", "--weeks", "6", "--noise", "0.1",
                 "--seed", "9"}) == 0);
  CHECK(run_cli({"ingest", "--raw", raw, "--out", data}) == 0);
  CHECK(run_cli({"stats", "--dataset", data}) == 0);

  SynthConfig cfg;
  cfg.num_users = 4;
  cfg.weeks = 6;
  cfg.noise_rate = 0.1;
  cfg.seed = 9;
  Dataset ds = Dataset::load(data);
  CHECK(ds.stats.num_users == 4);
  CHECK(ds.stats.num_checkins == 4 * expected_checkins_per_user(cfg));
}

TEST_CASE("cli: train writes a complete, self-describing run directory") {
  TempDir tmp("nextloc_cli_train");
  const std::string raw = tmp.file("raw.txt");
  const std::string data = tmp.file("data.bin");
  REQUIRE(run_cli({"synth", "--out", raw, "--users", "4", "--weeks", "4", "--seed", "3"}) == 0);
  REQUIRE(run_cli({"ingest", "--raw", raw, "--out", data}) == 0);
  const std::string runs = tmp.file("runs");
  REQUIRE(run_cli({"train", "--dataset", data, "--out", runs, "--epochs", "2", "--n", "16",
                   "--d", "8", "--seed", "21", "--max-prefixes", "6"}) == 0);
  auto dirs = run_dirs(runs);
  REQUIRE(dirs.size() == 1);
  CHECK(fs::exists(dirs[0] / "report.json"));
  CHECK(fs::exists(dirs[0] / "checkpoint.bin"));
  CHECK_FALSE(fs::exists(dirs[0] / "INCOMPLETE"));

  auto report = load_json(dirs[0] / "report.json");
  CHECK(report["seed"] == 21);
  CHECK(report["config"]["epochs"] == 2);  // effective config is echoed
  CHECK(report.contains("test"));

  // Same seed and config: byte-identical reports modulo the wall clock.
  REQUIRE(run_cli({"train", "--dataset", data, "--out", runs, "--epochs", "2", "--n", "16",
                   "--d", "8", "--seed", "21", "--max-prefixes", "6"}) == 0);
  dirs = run_dirs(runs);
  REQUIRE(dirs.size() == 2);  // append-only, nothing overwritten
  auto a = load_json(dirs[0] / "report.json");
  auto b = load_json(dirs[1] / "report.json");
  a.erase("wall_seconds");
  b.erase("wall_seconds");
  CHECK(a.dump() == b.dump());
}

TEST_CASE("cli: eval and export-attention consume a checkpoint") {
  TempDir tmp("nextloc_cli_eval");
  const std::string raw = tmp.file("raw.txt");
  const std::string data = tmp.file("data.bin");
  REQUIRE(run_cli({"synth", "--out", raw, "--users", "4", "--weeks", "4", "--seed", "5"}) == 0);
  REQUIRE(run_cli({"ingest", "--raw", raw, "--out", data}) == 0);
  const std::string runs = tmp.file("runs");
  REQUIRE(run_cli({"train", "--dataset", data, "--out", runs, "--epochs", "1", "--n", "12",
                   "--d", "6", "--seed", "2", "--max-prefixes", "4"}) == 0);
  auto dirs = run_dirs(runs);
  REQUIRE(dirs.size() == 1);
  const std::string ckpt = (dirs[0] / "checkpoint.bin").string();

  CHECK(run_cli({"eval", "--dataset", data, "--checkpoint", ckpt, "--n", "12"}) == 0);
  CHECK(run_cli({"export-attention", "--dataset", data, "--checkpoint", ckpt, "--n", "12",
                 "--user", "2", "--out", runs}) == 0);
  dirs = run_dirs(runs);
  REQUIRE(dirs.size() == 2);
  const fs::path att = dirs[0].string().find("attention") != std::string::npos ? dirs[0] : dirs[1];
  CHECK(fs::exists(att / "attention.csv"));
  CHECK(fs::exists(att / "attention.bmp"));
  auto meta = load_json(att / "attention_meta.json");
  CHECK(meta["user"] == 2);
  CHECK(meta["valid_len"].get<int>() >= 1);
  CHECK(meta["location_ids"].size() == 12);

  // CSV shape: n rows by n columns.
  std::ifstream csv(att / "attention.csv");
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 11);
  }
  CHECK(rows == 12);
}

TEST_CASE("cli: ablate emits one row per configured variant") {
  TempDir tmp("nextloc_cli_ablate");
  const std::string raw = tmp.file("raw.txt");
  const std::string data = tmp.file("data.bin");
  REQUIRE(run_cli({"synth", "--out", raw, "--users", "4", "--weeks", "4", "--seed", "8"}) == 0);
  REQUIRE(run_cli({"ingest", "--raw", raw, "--out", data}) == 0);
  const std::string runs = tmp.file("runs");
  REQUIRE(run_cli({"ablate", "--dataset", data, "--out", runs, "--epochs", "1", "--n", "12",
                   "--d", "4", "--variants", "full,-all", "--seeds", "1,2", "--max-prefixes",
                   "3"}) == 0);
  auto dirs = run_dirs(runs);
  REQUIRE(dirs.size() == 1);
  auto j = load_json(dirs[0] / "ablation.json");
  REQUIRE(j.size() == 2);  // two seeds
  for (const auto& seed_block : j) {
    CHECK(seed_block["rows"].size() == 2);
    CHECK(seed_block["rows"][0]["variant"] == "full");
    CHECK(seed_block["rows"][1]["variant"] == "-all");
  }
}

TEST_CASE("cli: config file supplies defaults and unknown keys are rejected") {
  TempDir tmp("nextloc_cli_config");
  const std::string raw = tmp.file("raw.txt");
  REQUIRE(run_cli({"synth", "--out", raw, "--users", "3", "--weeks", "4"}) == 0);

  const std::string good = tmp.file("good.ini");
  {
    std::ofstream os(good);
    os << "[ingest]\n"
       << "raw=" << raw << "\n"
       << "out=" << tmp.file("from_config.bin") << "\n";
  }
  CHECK(run_cli({"--config", good, "ingest"}) == 0);
  CHECK(fs::exists(tmp.file("from_config.bin")));

  const std::string bad = tmp.file("bad.ini");
  {
    std::ofstream os(bad);
    os << "[ingest]\n"
       << "raw=" << raw << "\n"
       << "no_such_key=1\n";
  }
  CHECK(run_cli({"--config", bad, "ingest"}) != 0);
}
