#include "nextloc/cli.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nextloc/ingest.hpp"
#include "nextloc/model.hpp"
#include "nextloc/synth.hpp"
#include "nextloc/train.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace nextloc {

namespace {

struct MissingFile : std::runtime_error {
  explicit MissingFile(const std::string& path) : std::runtime_error("file not found: " + path) {}
};

void check_input_file(const std::string& path) {
  if (!fs::exists(path)) throw MissingFile(path);
}

// Append-only run directories: runs/<cmd>-s<seed>-<utc stamp>[-k]. A marker
// file flags partially written directories until the command finishes.
fs::path make_run_dir(const std::string& out, const std::string& cmd, uint64_t seed) {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  fs::path base = fs::path(out) / (cmd + "-s" + std::to_string(seed) + "-" + stamp);
  fs::path dir = base;
  for (int k = 1; fs::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
  fs::create_directories(dir);
  std::ofstream(dir / "INCOMPLETE") << "run in progress\n";
  return dir;
}

void mark_complete(const fs::path& dir) { fs::remove(dir / "INCOMPLETE"); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  require(static_cast<bool>(os), "cannot write " + path.string());
  os << text;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  require(!out.empty(), "expected a comma-separated integer list, got '" + text + "'");
  return out;
}

IntervalMode parse_interval_mode(const std::string& s) {
  if (s == "unit") return IntervalMode::Unit;
  if (s == "interpolation") return IntervalMode::Interpolation;
  fail("interval-mode must be 'unit' or 'interpolation', got '" + s + "'");
}

MaskMode parse_mask_mode(const std::string& s) {
  if (s == "paper") return MaskMode::Paper;
  if (s == "presoftmax") return MaskMode::PreSoftmax;
  fail("mask-mode must be 'paper' or 'presoftmax', got '" + s + "'");
}

// Flat option set shared by the model-running subcommands.
struct TrainOpts {
  std::string dataset;
  std::string out = "runs";
  uint64_t seed = 1;
  int epochs = 50;
  double lr = 0.003;
  double dropout = 0.2;
  int neg_samples = 10;
  int n = 100;
  int d = 50;
  std::string eval_k = "5,10";
  std::string interval_mode = "unit";
  std::string mask_mode = "paper";
  std::string variant = "full";
  int max_prefixes = 0;

  void add_model_flags(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "run seed")->envname("NEXTLOC_SEED");
    cmd->add_option("--epochs", epochs)->envname("NEXTLOC_EPOCHS");
    cmd->add_option("--lr", lr)->envname("NEXTLOC_LR");
    cmd->add_option("--dropout", dropout)->envname("NEXTLOC_DROPOUT");
    cmd->add_option("--neg-samples", neg_samples, "balanced sampler draws per step")
        ->envname("NEXTLOC_NEG_SAMPLES");
    cmd->add_option("--n", n, "max sequence length")->envname("NEXTLOC_N");
    cmd->add_option("--d", d, "embedding dimension")->envname("NEXTLOC_D");
    cmd->add_option("--k", eval_k, "comma list of recall cutoffs")->envname("NEXTLOC_K");
    cmd->add_option("--interval-mode", interval_mode, "unit|interpolation")
        ->envname("NEXTLOC_INTERVAL_MODE");
    cmd->add_option("--mask-mode", mask_mode, "paper|presoftmax")->envname("NEXTLOC_MASK_MODE");
    cmd->add_option("--variant", variant, "ablation variant (full, -tim, -sim, -bs, ...)")
        ->envname("NEXTLOC_VARIANT");
    cmd->add_option("--max-prefixes", max_prefixes,
                    "cap on training prefixes per user (0 = all)")
        ->envname("NEXTLOC_MAX_PREFIXES");
  }

  TrainConfig to_config() const {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.lr = lr;
    cfg.dropout = dropout;
    cfg.neg_samples = neg_samples;
    cfg.n = n;
    cfg.d = d;
    cfg.seed = seed;
    cfg.eval_k = parse_int_list(eval_k);
    cfg.interval_mode = parse_interval_mode(interval_mode);
    cfg.mask_mode = parse_mask_mode(mask_mode);
    cfg.max_train_prefixes_per_user = max_prefixes;
    return apply_variant(cfg, variant);
  }
};

struct SynthOpts {
  std::string out;
  int users = 50;
  int weeks = 40;
  double noise = 0.1;
  int near_work = 3;
  int near_mall = 4;
  int filler = 20;
  double jitter_hm = 3.0;
  double p_friday = 1.0;
  double p_saturday = 1.0;
  bool full_final_week = false;
  uint64_t seed = 1;

  SynthConfig to_config() const {
    SynthConfig cfg;
    cfg.num_users = users;
    cfg.weeks = weeks;
    cfg.noise_rate = noise;
    cfg.near_work_restaurants = near_work;
    cfg.near_mall_restaurants = near_mall;
    cfg.filler_locations = filler;
    cfg.jitter_hm = jitter_hm;
    cfg.p_friday_fixed = p_friday;
    cfg.p_saturday_mall_set = p_saturday;
    cfg.end_at_saturday_dinner = !full_final_week;
    cfg.seed = seed;
    return cfg;
  }
};

ordered_json stats_json(const DatasetStats& stats) {
  ordered_json j;
  j["users"] = stats.num_users;
  j["locations"] = stats.num_locations;
  j["checkins"] = stats.num_checkins;
  j["skipped_lines"] = stats.skipped_lines;
  j["gps_conflicts"] = stats.gps_conflicts;
  return j;
}

void print_stats(const Dataset& ds) {
  std::cout << "users:      " << ds.stats.num_users << "\n"
            << "locations:  " << ds.stats.num_locations << "\n"
            << "check-ins:  " << ds.stats.num_checkins << "\n"
            << "skipped:    " << ds.stats.skipped_lines << "\n"
            << "gps import conflicts: " << ds.stats.gps_conflicts << "\n"
            << "users below min length: " << ds.dropped_users << "\n"
            << "train examples: " << ds.train_example_count << "\n";
}

void self_check_report(const EvalReport& report) {
  double prev = -1.0;
  for (const auto& [k, r] : report.recall) {  // map is ordered by k
    require(r >= prev - 1e-12 && r >= 0.0 && r <= 1.0,
            "self-check failed: recall@k must be within [0,1] and non-decreasing in k");
    prev = r;
  }
}

std::string format_ablation_table(const std::vector<AblationRow>& rows,
                                  const std::vector<int>& ks) {
  std::ostringstream os;
  os << "variant   ";
  for (int k : ks) os << "  recall@" << k;
  os << "\n";
  for (const auto& row : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-10s", row.variant.c_str());
    os << buf;
    for (int k : ks) {
      std::snprintf(buf, sizeof(buf), "  %8.4f", row.report.recall.count(k) ? row.report.recall.at(k) : 0.0);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

// 24-bit BMP heatmap of attention weights, brightest = largest weight.
void write_heatmap_bmp(const fs::path& path, const Tensor& weights) {
  const int n = static_cast<int>(weights.dim(0));
  double mx = 0.0;
  for (double v : weights.data()) mx = std::max(mx, v);
  if (mx <= 0.0) mx = 1.0;
  const int row_bytes = (3 * n + 3) & ~3;
  const uint32_t data_size = static_cast<uint32_t>(row_bytes) * static_cast<uint32_t>(n);
  const uint32_t file_size = 54 + data_size;
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), "cannot write " + path.string());
  auto w16 = [&](uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); };
  auto w32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  os.put('B').put('M');
  w32(file_size);
  w32(0);
  w32(54);
  w32(40);  // BITMAPINFOHEADER
  w32(static_cast<uint32_t>(n));
  w32(static_cast<uint32_t>(n));
  w16(1);
  w16(24);
  w32(0);
  w32(data_size);
  w32(2835);
  w32(2835);
  w32(0);
  w32(0);
  std::vector<char> row(static_cast<size_t>(row_bytes), 0);
  for (int i = n - 1; i >= 0; --i) {  // BMP rows run bottom-up
    for (int j = 0; j < n; ++j) {
      const double v = weights.at(i, j) / mx;
      const char g = static_cast<char>(std::lround(255.0 * std::min(1.0, std::max(0.0, v))));
      row[static_cast<size_t>(3 * j)] = g;
      row[static_cast<size_t>(3 * j + 1)] = g;
      row[static_cast<size_t>(3 * j + 2)] = g;
    }
    os.write(row.data(), row_bytes);
  }
}

int cmd_ingest(const std::string& raw, const std::string& format, const std::string& delimiter,
               const std::string& out, int min_checkins) {
  check_input_file(raw);
  std::ifstream is(raw);
  require(static_cast<bool>(is), "ingest: unreadable source " + raw);
  ParsedData parsed = parse_checkins(is, parse_format(format, delimiter));
  Dataset ds = build_dataset(std::move(parsed), min_checkins);
  ds.save(out);
  print_stats(ds);
  std::cout << "dataset written to " << out << "\n";
  return 0;
}

int cmd_synth(const SynthOpts& opts) {
  SynthConfig cfg = opts.to_config();
  std::ofstream os(opts.out);
  require(static_cast<bool>(os), "synth: cannot write " + opts.out);
  generate(cfg, os);
  std::cout << "wrote " << cfg.num_users * expected_checkins_per_user(cfg) << " check-ins ("
            << cfg.num_users << " users x " << expected_checkins_per_user(cfg) << ") to "
            << opts.out << "\n";
  return 0;
}

int cmd_train(const TrainOpts& opts) {
  check_input_file(opts.dataset);
  Dataset ds = Dataset::load(opts.dataset);
  TrainConfig cfg = opts.to_config();
  TrainResult res = train(ds, cfg);
  self_check_report(res.report);

  fs::path dir = make_run_dir(opts.out, "train", cfg.seed);
  write_text(dir / "report.json", res.report.to_json().dump(2) + "\n");
  save_params((dir / "checkpoint.bin").string(), res.params);
  mark_complete(dir);

  std::cout << "best epoch " << res.report.best_epoch << " (validation recall@"
            << res.report.selection_k << ")\n";
  for (const auto& [k, r] : res.report.recall) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "test recall@%-3d %.4f\n", k, r);
    std::cout << buf;
  }
  std::cout << "artifacts in " << dir.string() << "\n";
  return 0;
}

int cmd_eval(const TrainOpts& opts, const std::string& checkpoint, const std::string& split) {
  check_input_file(opts.dataset);
  check_input_file(checkpoint);
  Dataset ds = Dataset::load(opts.dataset);
  ModelParams params = load_params(checkpoint);
  TrainConfig cfg = opts.to_config();
  cfg.d = params.d;  // the checkpoint fixes the dimension
  ModelConfig mcfg = cfg.model_config();

  IntervalBounds bounds;
  const IntervalBounds* bounds_ptr = nullptr;
  if ((mcfg.use_tim || mcfg.use_sim) && mcfg.interval_mode == IntervalMode::Interpolation) {
    bounds = compute_interval_bounds(ds, mcfg.n);
    bounds_ptr = &bounds;
  }
  DistanceTable table = DistanceTable::build(ds.stats.location_gps);
  auto refs = split == "val" ? ds.val_refs() : ds.test_refs();
  auto recalls = evaluate(params, ds, refs, cfg.eval_k, mcfg, bounds_ptr, &table);

  ordered_json j;
  j["split"] = split;
  j["checkpoint"] = checkpoint;
  j["config"] = cfg.to_json();
  for (const auto& [k, r] : recalls) j["recall@" + std::to_string(k)] = r;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_ablate(const TrainOpts& opts, const std::string& variants_arg,
               const std::string& seeds_arg) {
  check_input_file(opts.dataset);
  Dataset ds = Dataset::load(opts.dataset);
  std::vector<std::string> variants;
  if (variants_arg == "all") {
    variants = all_variants();
  } else {
    std::stringstream ss(variants_arg);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) variants.push_back(tok);
  }
  std::vector<int> seeds = parse_int_list(seeds_arg);

  TrainConfig base = opts.to_config();
  fs::path dir = make_run_dir(opts.out, "ablate", base.seed);
  ordered_json all = ordered_json::array();
  std::ostringstream table_text;
  for (int seed : seeds) {
    base.seed = static_cast<uint64_t>(seed);
    auto rows = ablation_suite(ds, base, variants);
    ordered_json jseed;
    jseed["seed"] = seed;
    ordered_json jrows = ordered_json::array();
    for (const auto& row : rows) {
      ordered_json r;
      r["variant"] = row.variant;
      r["report"] = row.report.to_json();
      jrows.push_back(r);
    }
    jseed["rows"] = jrows;
    all.push_back(jseed);
    table_text << "seed " << seed << "\n" << format_ablation_table(rows, base.eval_k) << "\n";
  }
  write_text(dir / "ablation.json", all.dump(2) + "\n");
  write_text(dir / "ablation.txt", table_text.str());
  mark_complete(dir);
  std::cout << table_text.str() << "artifacts in " << dir.string() << "\n";
  return 0;
}

int cmd_export_attention(const TrainOpts& opts, const std::string& checkpoint, int user,
                         const std::string& split) {
  check_input_file(opts.dataset);
  check_input_file(checkpoint);
  Dataset ds = Dataset::load(opts.dataset);
  ModelParams params = load_params(checkpoint);
  TrainConfig cfg = opts.to_config();
  cfg.d = params.d;
  ModelConfig mcfg = cfg.model_config();
  require(user >= 1 && user <= ds.stats.num_users, "export: user id out of range");
  require(ds.user_kept(user), "export: user has too few check-ins");

  const auto& traj = ds.per_user[static_cast<size_t>(user)];
  const int m = static_cast<int>(traj.size());
  const int prefix = split == "val" ? m - 2 : m - 1;
  TrajectorySequence seq = ds.materialize({user, prefix}, mcfg.n);
  RelationMatrices rel = trajectory_relation(seq);

  IntervalBounds bounds;
  const IntervalBounds* bounds_ptr = nullptr;
  if ((mcfg.use_tim || mcfg.use_sim) && mcfg.interval_mode == IntervalMode::Interpolation) {
    bounds = compute_interval_bounds(ds, mcfg.n);
    bounds_ptr = &bounds;
  }
  Tensor weights = export_attention(seq, rel, params, mcfg, bounds_ptr);

  fs::path dir = make_run_dir(opts.out, "attention", cfg.seed);
  {
    std::ofstream os(dir / "attention.csv");
    require(static_cast<bool>(os), "cannot write attention.csv");
    char buf[32];
    for (int i = 0; i < mcfg.n; ++i) {
      for (int j = 0; j < mcfg.n; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", weights.at(i, j));
        os << (j ? "," : "") << buf;
      }
      os << "\n";
    }
  }
  ordered_json meta;
  meta["user"] = user;
  meta["split"] = split;
  meta["valid_len"] = seq.valid_len;
  ordered_json ids = ordered_json::array();
  for (const auto& e : seq.entries) ids.push_back(e.location_id);
  meta["location_ids"] = ids;
  meta["config"] = cfg.to_json();
  write_text(dir / "attention_meta.json", meta.dump(2) + "\n");
  write_heatmap_bmp(dir / "attention.bmp", weights);
  mark_complete(dir);
  std::cout << "attention matrix (" << mcfg.n << "x" << mcfg.n << ", valid " << seq.valid_len
            << ") in " << dir.string() << "\n";
  return 0;
}

int cmd_stats(const std::string& dataset) {
  check_input_file(dataset);
  Dataset ds = Dataset::load(dataset);
  print_stats(ds);
  std::cout << stats_json(ds.stats).dump(2) << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"next-location recommender: spatiotemporal attention over check-in trajectories"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file ([subcommand] sections)");
  app.allow_config_extras(false);

  TrainOpts train_opts;
  SynthOpts synth_opts;
  std::string raw_path, format = "user,loc,lat,lon,time", delimiter = "tab";
  std::string checkpoint, split = "test", variants = "all", seeds = "1,2,3";
  std::string dataset_out = "dataset.bin", stats_dataset;
  int min_checkins = 5;
  int export_user = 1;

  auto* ingest = app.add_subcommand("ingest", "parse raw check-ins into a dataset file");
  ingest->add_option("--raw", raw_path, "raw check-in text file")->required()
      ->envname("NEXTLOC_RAW");
  ingest->add_option("--format", format, "field order, e.g. user,loc,lat,lon,time")
      ->envname("NEXTLOC_FORMAT");
  ingest->add_option("--delimiter", delimiter, "tab|comma|space")->envname("NEXTLOC_DELIMITER");
  ingest->add_option("--out", dataset_out, "dataset file to write")->envname("NEXTLOC_OUT");
  ingest->add_option("--min-checkins", min_checkins, "drop users with fewer visits");

  auto* synth = app.add_subcommand("synth", "generate a routine-patterned synthetic dataset");
  synth->add_option("--out", synth_opts.out, "raw check-in file to write")->required();
  synth->add_option("--users", synth_opts.users);
  synth->add_option("--weeks", synth_opts.weeks);
  synth->add_option("--noise", synth_opts.noise, "per-visit replacement probability");
  synth->add_option("--near-work", synth_opts.near_work);
  synth->add_option("--near-mall", synth_opts.near_mall);
  synth->add_option("--filler", synth_opts.filler);
  synth->add_option("--jitter-hm", synth_opts.jitter_hm);
  synth->add_option("--p-friday", synth_opts.p_friday);
  synth->add_option("--p-saturday", synth_opts.p_saturday);
  synth->add_flag("--full-final-week", synth_opts.full_final_week,
                  "do not stop the stream at the last Saturday dinner");
  synth->add_option("--seed", synth_opts.seed)->envname("NEXTLOC_SEED");

  auto* train_cmd = app.add_subcommand("train", "train and evaluate on the test split");
  train_cmd->add_option("--dataset", train_opts.dataset)->required()->envname("NEXTLOC_DATASET");
  train_cmd->add_option("--out", train_opts.out, "runs directory")->envname("NEXTLOC_OUT");
  train_opts.add_model_flags(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--dataset", train_opts.dataset)->required()->envname("NEXTLOC_DATASET");
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--split", split, "test|val");
  train_opts.add_model_flags(eval_cmd);

  auto* ablate = app.add_subcommand("ablate", "run the ablation variants");
  ablate->add_option("--dataset", train_opts.dataset)->required()->envname("NEXTLOC_DATASET");
  ablate->add_option("--out", train_opts.out, "runs directory")->envname("NEXTLOC_OUT");
  ablate->add_option("--variants", variants, "comma list or 'all'");
  ablate->add_option("--seeds", seeds, "comma list of seeds");
  train_opts.add_model_flags(ablate);

  auto* expat = app.add_subcommand("export-attention", "dump aggregation attention weights");
  expat->add_option("--dataset", train_opts.dataset)->required()->envname("NEXTLOC_DATASET");
  expat->add_option("--checkpoint", checkpoint)->required();
  expat->add_option("--user", export_user, "dense user id");
  expat->add_option("--split", split, "test|val");
  expat->add_option("--out", train_opts.out, "runs directory")->envname("NEXTLOC_OUT");
  train_opts.add_model_flags(expat);

  auto* stats = app.add_subcommand("stats", "print dataset statistics");
  stats->add_option("--dataset", stats_dataset)->required()->envname("NEXTLOC_DATASET");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (ingest->parsed())
      return cmd_ingest(raw_path, format, delimiter, dataset_out, min_checkins);
    if (synth->parsed()) return cmd_synth(synth_opts);
    if (train_cmd->parsed()) return cmd_train(train_opts);
    if (eval_cmd->parsed()) return cmd_eval(train_opts, checkpoint, split);
    if (ablate->parsed()) return cmd_ablate(train_opts, variants, seeds);
    if (expat->parsed()) return cmd_export_attention(train_opts, checkpoint, export_user, split);
    if (stats->parsed()) return cmd_stats(stats_dataset);
  } catch (const MissingFile& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace nextloc
