#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nextloc/ingest.hpp"
#include "nextloc/model.hpp"

namespace nextloc {

struct TrainConfig {
  int epochs = 50;
  double lr = 0.003;
  double dropout = 0.2;
  int neg_samples = 10;
  int n = 100;
  int d = 50;
  uint64_t seed = 1;
  std::vector<int> eval_k{5, 10};
  IntervalMode interval_mode = IntervalMode::Unit;
  MaskMode mask_mode = MaskMode::Paper;
  bool use_tim = true;
  bool use_sim = true;
  bool use_candidate_intervals = true;
  bool use_bs = true;  // off: full cross-entropy over all L-1 negatives
  int max_train_prefixes_per_user = 0;  // 0 = all
  int min_checkins = 5;

  ModelConfig model_config() const;
  nlohmann::ordered_json to_json() const;
};

// s distinct negative location ids, uniform over [1, L] \ {label}. The rng
// advances with every draw so successive steps see fresh negatives.
std::vector<int32_t> balanced_sample(int32_t num_locations, int32_t label, int s, Rng& rng);

// Sampled sigmoid cross-entropy on matching scores; negatives are location
// ids. sigma_counter counts the score terms entering the loss.
Tensor training_loss(const Tensor& scores, int32_t label_location,
                     const std::vector<int32_t>& negative_locations,
                     uint64_t* sigma_counter = nullptr);

struct EvalReport {
  std::map<int, double> recall;  // on the evaluated split
  std::vector<double> epoch_mean_loss;
  std::vector<double> epoch_val_recall;  // at the model-selection k
  int best_epoch = -1;
  int selection_k = 5;
  uint64_t seed = 0;
  uint64_t sigma_terms = 0;
  int64_t steps = 0;
  int64_t train_examples = 0;
  double wall_seconds = 0.0;
  nlohmann::ordered_json config_snapshot;

  nlohmann::ordered_json to_json() const;
};

// Rank of the label under descending score order (0 = top). Ties break
// toward the lower location id, so rankings are deterministic.
int score_rank(const std::vector<double>& scores, int label_index);

std::map<int, double> evaluate(ModelParams& params, const Dataset& dataset,
                               const std::vector<Dataset::ExampleRef>& refs,
                               const std::vector<int>& ks, const ModelConfig& cfg,
                               const IntervalBounds* bounds,
                               const DistanceTable* table = nullptr);

struct TrainResult {
  ModelParams params;  // snapshot with the best validation recall
  EvalReport report;   // test recalls plus the training trace
  IntervalBounds bounds{};
  bool has_bounds = false;
};

TrainResult train(const Dataset& dataset, const TrainConfig& cfg);

ModelParams clone_params(ModelParams& src);

// Ablation variants: "full", "-tim", "-sim", "-bs", "-tim-bs", "-sim-bs", "-all".
TrainConfig apply_variant(const TrainConfig& base, const std::string& variant);
const std::vector<std::string>& all_variants();

struct AblationRow {
  std::string variant;
  EvalReport report;
};

std::vector<AblationRow> ablation_suite(const Dataset& dataset, const TrainConfig& base,
                                        const std::vector<std::string>& variants);

}  // namespace nextloc
