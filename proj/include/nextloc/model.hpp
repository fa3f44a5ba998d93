#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nextloc/relation.hpp"
#include "nextloc/tensor.hpp"
#include "nextloc/types.hpp"

namespace nextloc {

enum class IntervalMode { Unit, Interpolation };
enum class MaskMode { Paper, PreSoftmax };

struct ModelConfig {
  int d = 50;
  int n = 100;
  IntervalMode interval_mode = IntervalMode::Unit;
  // Paper: softmax over all columns, then elementwise mask. PreSoftmax: the
  // conventional alternative that masks logits before normalizing.
  MaskMode mask_mode = MaskMode::Paper;
  bool use_tim = true;                 // temporal interval matrices
  bool use_sim = true;                 // spatial interval matrices
  bool use_candidate_intervals = true; // candidate-side interval bias
  double dropout = 0.2;
};

// All learnable arrays. Row 0 of the user/location tables is the padding row:
// zero at init and never looked up, so it stays zero.
struct ModelParams {
  Tensor user_emb;   // (U+1) x d
  Tensor loc_emb;    // (L+1) x d
  Tensor time_emb;   // 168 x d
  Tensor unit_t, unit_s;                 // per-unit interval vectors
  Tensor sup_t, inf_t, sup_s, inf_s;     // interpolation anchors
  Tensor w_q, w_k, w_v;                  // d x d projections
  Tensor w_reduce_t, w_reduce_s;         // reduction over the embed axis (trajectory)
  Tensor w_reduce_nt, w_reduce_ns;       // reduction over the embed axis (candidates)
  int num_users = 0;
  int num_locations = 0;
  int d = 0;

  // Embeddings and projections start uniform in [-1/sqrt(d), 1/sqrt(d)];
  // reduction vectors start at zero so the interval bias starts at zero while
  // its gradient path through the unit/anchor vectors stays live.
  static ModelParams init(int num_users, int num_locations, const ModelConfig& cfg, Rng& rng);

  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<Tensor> trainable();
};

// Per-entry interval embeddings (embed dimension vectors).
std::vector<double> interval_vector_unit(double value, const Tensor& unit);
std::vector<double> interval_vector_interp(double value, const Tensor& sup, const Tensor& inf,
                                           double lower, double upper);

// n x d check-in representations: user + location + hour-of-week embeddings
// for valid slots, zero rows for padding.
Tensor embed_trajectory(const TrajectorySequence& seq, ModelParams& params,
                        const ModelConfig& cfg);

// Reduced interval bias matrices. The learned reduction commutes with the
// per-entry scaling, so these evaluate dot(vec, w) once per term instead of
// materializing an extra embed axis.
Tensor interval_bias(const RelationMatrices& rel, ModelParams& params, const ModelConfig& cfg,
                     const IntervalBounds* bounds);
Tensor candidate_interval_bias(const CandidateRelation& rel, ModelParams& params,
                               const ModelConfig& cfg, const IntervalBounds* bounds);

Tensor self_attention_aggregate(const Tensor& traj_emb, const Tensor& bias, int valid_len,
                                ModelParams& params, const ModelConfig& cfg,
                                bool training = false, Rng* rng = nullptr);

// Per-candidate matching scores: candidate-axis softmax at each valid
// position, summed over positions so repeated visits accumulate.
Tensor attention_match(const Tensor& aggregated, const Tensor* candidate_bias, int valid_len,
                       ModelParams& params, const ModelConfig& cfg);

Tensor forward(const TrajectorySequence& seq, const RelationMatrices& rel,
               const CandidateRelation* cand, ModelParams& params, const ModelConfig& cfg,
               const IntervalBounds* bounds, bool training = false, Rng* rng = nullptr);

// Aggregation-layer attention weights (n x n) for a sequence, eval mode.
Tensor export_attention(const TrajectorySequence& seq, const RelationMatrices& rel,
                        ModelParams& params, const ModelConfig& cfg,
                        const IntervalBounds* bounds);

// Checkpoint the full parameter set (bit-exact round trip).
void save_params(const std::string& path, ModelParams& params);
ModelParams load_params(const std::string& path);

}  // namespace nextloc
