#include "nextloc/train.hpp"

#include <chrono>
#include <cmath>
#include <unordered_set>

#include "nextloc/adam.hpp"

namespace nextloc {

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.d = d;
  m.n = n;
  m.interval_mode = interval_mode;
  m.mask_mode = mask_mode;
  m.use_tim = use_tim;
  m.use_sim = use_sim;
  m.use_candidate_intervals = use_candidate_intervals;
  m.dropout = dropout;
  return m;
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = epochs;
  j["lr"] = lr;
  j["dropout"] = dropout;
  j["neg_samples"] = neg_samples;
  j["n"] = n;
  j["d"] = d;
  j["seed"] = seed;
  j["eval_k"] = eval_k;
  j["interval_mode"] = interval_mode == IntervalMode::Unit ? "unit" : "interpolation";
  j["mask_mode"] = mask_mode == MaskMode::Paper ? "paper" : "presoftmax";
  j["use_tim"] = use_tim;
  j["use_sim"] = use_sim;
  j["use_candidate_intervals"] = use_candidate_intervals;
  j["use_bs"] = use_bs;
  j["max_train_prefixes_per_user"] = max_train_prefixes_per_user;
  j["min_checkins"] = min_checkins;
  return j;
}

std::vector<int32_t> balanced_sample(int32_t num_locations, int32_t label, int s, Rng& rng) {
  require(s >= 1 && s <= num_locations - 1,
          "balanced_sample: need 1 <= s <= L-1, got s=" + std::to_string(s) +
              " with L=" + std::to_string(num_locations));
  // Draw from [1, L-1] and skip over the label; rejection handles duplicates.
  std::vector<int32_t> out;
  out.reserve(static_cast<size_t>(s));
  std::unordered_set<int32_t> taken;
  while (static_cast<int>(out.size()) < s) {
    int32_t id = static_cast<int32_t>(rng.uniform_below(static_cast<uint64_t>(num_locations - 1))) + 1;
    if (id >= label) ++id;
    if (taken.insert(id).second) out.push_back(id);
  }
  return out;
}

Tensor training_loss(const Tensor& scores, int32_t label_location,
                     const std::vector<int32_t>& negative_locations, uint64_t* sigma_counter) {
  std::vector<int64_t> neg_idx;
  neg_idx.reserve(negative_locations.size());
  for (int32_t id : negative_locations) neg_idx.push_back(id - 1);
  return sampled_sigmoid_ce(scores, label_location - 1, neg_idx, sigma_counter);
}

int score_rank(const std::vector<double>& scores, int label_index) {
  const double ls = scores[static_cast<size_t>(label_index)];
  int rank = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (static_cast<int>(i) == label_index) continue;
    if (scores[i] > ls || (scores[i] == ls && static_cast<int>(i) < label_index)) ++rank;
  }
  return rank;
}

namespace {

struct ExampleInputs {
  TrajectorySequence seq;
  RelationMatrices rel;
  CandidateRelation cand;
  bool has_cand = false;
};

ExampleInputs prepare(const Dataset& ds, const Dataset::ExampleRef& ref, const ModelConfig& cfg,
                      const DistanceTable* table) {
  ExampleInputs in;
  in.seq = ds.materialize(ref, cfg.n);
  in.rel = trajectory_relation(in.seq);
  if (cfg.use_candidate_intervals && (cfg.use_tim || cfg.use_sim)) {
    in.cand = candidate_relation(ds.stats.location_gps, in.seq, in.seq.label_time, table);
    in.has_cand = true;
  }
  return in;
}

constexpr int kDistanceTableMaxLocations = 4000;

}  // namespace

std::map<int, double> evaluate(ModelParams& params, const Dataset& dataset,
                               const std::vector<Dataset::ExampleRef>& refs,
                               const std::vector<int>& ks, const ModelConfig& cfg,
                               const IntervalBounds* bounds, const DistanceTable* table) {
  std::map<int, int64_t> hits;
  for (int k : ks) hits[k] = 0;
  for (const auto& ref : refs) {
    ExampleInputs in = prepare(dataset, ref, cfg, table);
    Tensor scores = forward(in.seq, in.rel, in.has_cand ? &in.cand : nullptr, params, cfg, bounds);
    const int rank = score_rank(scores.data(), in.seq.label_location - 1);
    for (int k : ks)
      if (rank < k) ++hits[k];
  }
  std::map<int, double> out;
  for (int k : ks)
    out[k] = refs.empty() ? 0.0 : static_cast<double>(hits[k]) / static_cast<double>(refs.size());
  return out;
}

ModelParams clone_params(ModelParams& src) {
  ModelParams dst = src;  // copies handles; replace each tensor with a deep copy
  auto src_named = src.named();
  auto dst_named = dst.named();
  for (size_t i = 0; i < src_named.size(); ++i) {
    Tensor& s = *src_named[i].second;
    *dst_named[i].second = Tensor::from_data(s.shape(), s.data(), s.requires_grad());
  }
  return dst;
}

TrainResult train(const Dataset& dataset, const TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig mcfg = cfg.model_config();
  require(cfg.epochs >= 1, "train: epochs must be >= 1");
  const int32_t L = dataset.stats.num_locations;
  require(L >= 2, "train: need at least two locations");
  if (cfg.use_bs)
    require(cfg.neg_samples <= L - 1, "train: neg_samples " + std::to_string(cfg.neg_samples) +
                                          " exceeds L-1 = " + std::to_string(L - 1));

  Rng init_rng(derive_seed(cfg.seed, 0));
  Rng shuffle_rng(derive_seed(cfg.seed, 1));
  Rng sampler_rng(derive_seed(cfg.seed, 2));  // separate stream: ablating the
  Rng dropout_rng(derive_seed(cfg.seed, 3));  // sampler must not move the shuffle

  ModelParams params = ModelParams::init(dataset.stats.num_users, L, mcfg, init_rng);

  TrainResult result;
  if ((cfg.use_tim || cfg.use_sim) && cfg.interval_mode == IntervalMode::Interpolation) {
    result.bounds = compute_interval_bounds(dataset, cfg.n);
    result.has_bounds = true;
  }
  const IntervalBounds* bounds = result.has_bounds ? &result.bounds : nullptr;

  DistanceTable table;
  const DistanceTable* table_ptr = nullptr;
  if (L <= kDistanceTableMaxLocations) {
    table = DistanceTable::build(dataset.stats.location_gps);
    table_ptr = &table;
  }

  std::vector<Dataset::ExampleRef> examples = dataset.train_refs(cfg.max_train_prefixes_per_user);
  require(!examples.empty(), "train: no training examples");
  const auto val_refs = dataset.val_refs();
  const auto test_refs = dataset.test_refs();

  EvalReport& report = result.report;
  report.seed = cfg.seed;
  report.train_examples = static_cast<int64_t>(examples.size());
  report.config_snapshot = cfg.to_json();
  report.selection_k = cfg.eval_k.empty() ? 5 : cfg.eval_k.front();
  for (int k : cfg.eval_k)
    if (k == 5) report.selection_k = 5;

  std::vector<Tensor> trainable = params.trainable();
  AdamState adam;
  adam.lr = cfg.lr;

  std::vector<int32_t> all_negatives;  // reused in full cross-entropy mode
  ModelParams best;
  double best_recall = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(examples);
    double loss_sum = 0.0;
    for (size_t step = 0; step < examples.size(); ++step) {
      ExampleInputs in = prepare(dataset, examples[step], mcfg, table_ptr);
      Tensor scores = forward(in.seq, in.rel, in.has_cand ? &in.cand : nullptr, params, mcfg,
                              bounds, /*training=*/true, &dropout_rng);
      std::vector<int32_t> negatives;
      if (cfg.use_bs) {
        negatives = balanced_sample(L, in.seq.label_location, cfg.neg_samples, sampler_rng);
      } else {
        all_negatives.clear();
        for (int32_t id = 1; id <= L; ++id)
          if (id != in.seq.label_location) all_negatives.push_back(id);
        negatives = all_negatives;
      }
      Tensor loss = training_loss(scores, in.seq.label_location, negatives, &report.sigma_terms);
      const double lv = loss.value();
      if (!std::isfinite(lv))
        fail("train: loss diverged (non-finite) at epoch " + std::to_string(epoch + 1) +
             ", step " + std::to_string(step) + ": " + std::to_string(lv));
      loss_sum += lv;
      loss.backward();
      adam_step(trainable, adam);
      zero_grads(trainable);
      ++report.steps;
    }
    report.epoch_mean_loss.push_back(loss_sum / static_cast<double>(examples.size()));

    auto val = evaluate(params, dataset, val_refs, {report.selection_k}, mcfg, bounds, table_ptr);
    const double vr = val[report.selection_k];
    report.epoch_val_recall.push_back(vr);
    if (vr >= best_recall) {  // ties keep the most-trained snapshot
      best_recall = vr;
      best = clone_params(params);
      report.best_epoch = epoch + 1;
    }
  }

  result.params = clone_params(best);
  report.recall = evaluate(result.params, dataset, test_refs, cfg.eval_k, mcfg, bounds, table_ptr);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["config"] = config_snapshot;
  nlohmann::ordered_json rec;
  for (const auto& [k, v] : recall) rec["recall@" + std::to_string(k)] = v;
  j["test"] = rec;
  j["epoch_mean_loss"] = epoch_mean_loss;
  j["epoch_val_recall"] = epoch_val_recall;
  j["selection_k"] = selection_k;
  j["best_epoch"] = best_epoch;
  j["steps"] = steps;
  j["train_examples"] = train_examples;
  j["sigma_terms"] = sigma_terms;
  j["wall_seconds"] = wall_seconds;
  return j;
}

TrainConfig apply_variant(const TrainConfig& base, const std::string& variant) {
  TrainConfig cfg = base;
  cfg.use_tim = true;
  cfg.use_sim = true;
  cfg.use_bs = true;
  if (variant == "full") {
  } else if (variant == "-tim") {
    cfg.use_tim = false;
  } else if (variant == "-sim") {
    cfg.use_sim = false;
  } else if (variant == "-bs") {
    cfg.use_bs = false;
  } else if (variant == "-tim-bs") {
    cfg.use_tim = false;
    cfg.use_bs = false;
  } else if (variant == "-sim-bs") {
    cfg.use_sim = false;
    cfg.use_bs = false;
  } else if (variant == "-all") {
    cfg.use_tim = false;
    cfg.use_sim = false;
    cfg.use_bs = false;
  } else {
    fail("unknown ablation variant '" + variant + "'");
  }
  return cfg;
}

const std::vector<std::string>& all_variants() {
  static const std::vector<std::string> v = {"full",    "-tim",    "-sim", "-tim-bs",
                                             "-sim-bs", "-bs",     "-all"};
  return v;
}

std::vector<AblationRow> ablation_suite(const Dataset& dataset, const TrainConfig& base,
                                        const std::vector<std::string>& variants) {
  std::vector<AblationRow> rows;
  for (const auto& name : variants) {
    TrainConfig cfg = apply_variant(base, name);
    TrainResult res = train(dataset, cfg);
    rows.push_back({name, std::move(res.report)});
  }
  return rows;
}

}  // namespace nextloc
