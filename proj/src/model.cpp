#include "nextloc/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "nextloc/checkpoint.hpp"

namespace nextloc {

ModelParams ModelParams::init(int num_users, int num_locations, const ModelConfig& cfg, Rng& rng) {
  ModelParams p;
  p.num_users = num_users;
  p.num_locations = num_locations;
  p.d = cfg.d;
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  const int64_t d = cfg.d;
  p.user_emb = Tensor::uniform({num_users + 1, d}, -s, s, rng, true);
  p.loc_emb = Tensor::uniform({num_locations + 1, d}, -s, s, rng, true);
  for (int64_t j = 0; j < d; ++j) {  // padding rows
    p.user_emb.set(j, 0.0);
    p.loc_emb.set(j, 0.0);
  }
  p.time_emb = Tensor::uniform({168, d}, -s, s, rng, true);
  p.unit_t = Tensor::uniform({d}, -s, s, rng, true);
  p.unit_s = Tensor::uniform({d}, -s, s, rng, true);
  p.sup_t = Tensor::uniform({d}, -s, s, rng, true);
  p.inf_t = Tensor::uniform({d}, -s, s, rng, true);
  p.sup_s = Tensor::uniform({d}, -s, s, rng, true);
  p.inf_s = Tensor::uniform({d}, -s, s, rng, true);
  p.w_q = Tensor::uniform({d, d}, -s, s, rng, true);
  p.w_k = Tensor::uniform({d, d}, -s, s, rng, true);
  p.w_v = Tensor::uniform({d, d}, -s, s, rng, true);
  p.w_reduce_t = Tensor::zeros({d}, true);
  p.w_reduce_s = Tensor::zeros({d}, true);
  p.w_reduce_nt = Tensor::zeros({d}, true);
  p.w_reduce_ns = Tensor::zeros({d}, true);
  return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
  return {
      {"user_emb", &user_emb},       {"loc_emb", &loc_emb},
      {"time_emb", &time_emb},       {"unit_t", &unit_t},
      {"unit_s", &unit_s},           {"sup_t", &sup_t},
      {"inf_t", &inf_t},             {"sup_s", &sup_s},
      {"inf_s", &inf_s},             {"w_q", &w_q},
      {"w_k", &w_k},                 {"w_v", &w_v},
      {"w_reduce_t", &w_reduce_t},   {"w_reduce_s", &w_reduce_s},
      {"w_reduce_nt", &w_reduce_nt}, {"w_reduce_ns", &w_reduce_ns},
  };
}

std::vector<Tensor> ModelParams::trainable() {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(*t);
  return out;
}

std::vector<double> interval_vector_unit(double value, const Tensor& unit) {
  std::vector<double> out(unit.data());
  for (double& x : out) x *= value;
  return out;
}

std::vector<double> interval_vector_interp(double value, const Tensor& sup, const Tensor& inf,
                                           double lower, double upper) {
  require(lower <= upper, "interval embedding: lower bound above upper bound");
  std::vector<double> out(sup.data().size());
  if (upper == lower) return sup.data();  // degenerate range collapses to sup
  const double c = std::clamp(value, lower, upper);
  const double a = (upper - c) / (upper - lower);
  const double b = (c - lower) / (upper - lower);
  for (size_t i = 0; i < out.size(); ++i) out[i] = a * sup.data()[i] + b * inf.data()[i];
  return out;
}

Tensor embed_trajectory(const TrajectorySequence& seq, ModelParams& params,
                        const ModelConfig& cfg) {
  const int n = static_cast<int>(seq.entries.size());
  require(seq.valid_len >= 0 && seq.valid_len <= n, "embed_trajectory: bad valid_len");
  std::vector<int64_t> loc_ids(static_cast<size_t>(n), 0);
  std::vector<int64_t> time_ids(static_cast<size_t>(n), 0);
  for (int i = 0; i < seq.valid_len; ++i) {
    const CheckIn& e = seq.entries[static_cast<size_t>(i)];
    require(e.location_id >= 1 && e.location_id <= params.num_locations,
            "embed_trajectory: location id " + std::to_string(e.location_id) + " out of range");
    loc_ids[static_cast<size_t>(i)] = e.location_id;
    time_ids[static_cast<size_t>(i)] = hour_of_week(e.timestamp);
  }
  int64_t uid = seq.valid_len > 0 ? seq.user_id : 0;
  require(uid >= 0 && uid <= params.num_users,
          "embed_trajectory: user id " + std::to_string(uid) + " out of range");

  Tensor emb = add(gather_rows(params.loc_emb, loc_ids), gather_rows(params.time_emb, time_ids));
  emb = add_rowvec(emb, gather_rows(params.user_emb, {uid}));
  // Force padding rows to zero regardless of padding slot content.
  Tensor row_mask = Tensor::zeros({n, cfg.d});
  std::fill(row_mask.data().begin(),
            row_mask.data().begin() + static_cast<size_t>(seq.valid_len) * cfg.d, 1.0);
  return mul(emb, row_mask);
}

namespace {

// One reduced interval term: entries x dot(vec, reduce) on the valid region.
// `values` must already be zero outside the valid region for unit mode; the
// interpolation path rebuilds its coefficient matrices with an explicit mask.
Tensor reduced_term_unit(const std::vector<double>& values, std::vector<int64_t> shape,
                         const Tensor& unit, const Tensor& reduce) {
  Tensor coeff = dot(unit, reduce);
  return scale_by(Tensor::from_data(std::move(shape), values), coeff);
}

Tensor reduced_term_interp(const std::vector<double>& values, const std::vector<int64_t>& shape,
                           const Tensor& sup, const Tensor& inf, const Tensor& reduce,
                           double lower, double upper,
                           const std::function<bool(int64_t)>& valid) {
  require(lower <= upper, "interval bias: lower bound above upper bound");
  std::vector<double> alpha(values.size(), 0.0), beta(values.size(), 0.0);
  for (size_t i = 0; i < values.size(); ++i) {
    if (!valid(static_cast<int64_t>(i))) continue;
    if (upper == lower) {
      alpha[i] = 1.0;
    } else {
      const double c = std::clamp(values[i], lower, upper);
      alpha[i] = (upper - c) / (upper - lower);
      beta[i] = (c - lower) / (upper - lower);
    }
  }
  Tensor term = scale_by(Tensor::from_data(shape, std::move(alpha)), dot(sup, reduce));
  return add(term, scale_by(Tensor::from_data(shape, std::move(beta)), dot(inf, reduce)));
}

Tensor bias_from_parts(const std::vector<double>& tvals, const std::vector<double>& svals,
                       std::vector<int64_t> shape, ModelParams& p, const ModelConfig& cfg,
                       const IntervalBounds* bounds, bool candidate,
                       const std::function<bool(int64_t)>& valid) {
  const Tensor& rt = candidate ? p.w_reduce_nt : p.w_reduce_t;
  const Tensor& rs = candidate ? p.w_reduce_ns : p.w_reduce_s;
  Tensor out;
  if (cfg.use_tim) {
    out = cfg.interval_mode == IntervalMode::Unit
              ? reduced_term_unit(tvals, shape, p.unit_t, rt)
              : reduced_term_interp(tvals, shape, p.sup_t, p.inf_t, rt,
                                    bounds->t_min, bounds->t_max, valid);
  }
  if (cfg.use_sim) {
    Tensor sterm = cfg.interval_mode == IntervalMode::Unit
                       ? reduced_term_unit(svals, shape, p.unit_s, rs)
                       : reduced_term_interp(svals, shape, p.sup_s, p.inf_s, rs,
                                             bounds->s_min, bounds->s_max, valid);
    out = out.defined() ? add(out, sterm) : sterm;
  }
  if (!out.defined()) out = Tensor::zeros(std::move(shape));
  return out;
}

}  // namespace

Tensor interval_bias(const RelationMatrices& rel, ModelParams& params, const ModelConfig& cfg,
                     const IntervalBounds* bounds) {
  if ((cfg.use_tim || cfg.use_sim) && cfg.interval_mode == IntervalMode::Interpolation)
    require(bounds != nullptr, "interval bias: interpolation mode needs bounds");
  const int64_t n = rel.n;
  const int v = rel.valid_len;
  auto valid = [n, v](int64_t flat) {
    return flat / n < v && flat % n < v;
  };
  return bias_from_parts(rel.delta_t_hours, rel.delta_s_hm, {n, n}, params, cfg, bounds,
                         /*candidate=*/false, valid);
}

Tensor candidate_interval_bias(const CandidateRelation& rel, ModelParams& params,
                               const ModelConfig& cfg, const IntervalBounds* bounds) {
  if ((cfg.use_tim || cfg.use_sim) && cfg.interval_mode == IntervalMode::Interpolation)
    require(bounds != nullptr, "interval bias: interpolation mode needs bounds");
  const int64_t n = rel.n;
  const int v = rel.valid_len;
  auto valid = [n, v](int64_t flat) { return flat % n < v; };
  return bias_from_parts(rel.n_t_hours, rel.n_s_hm, {rel.num_candidates, n}, params, cfg, bounds,
                         /*candidate=*/true, valid);
}

Tensor self_attention_aggregate(const Tensor& traj_emb, const Tensor& bias, int valid_len,
                                ModelParams& params, const ModelConfig& cfg, bool training,
                                Rng* rng) {
  const int64_t n = traj_emb.dim(0);
  require(bias.rank() == 2 && bias.dim(0) == n && bias.dim(1) == n,
          "self_attention: bias shape " + shape_str(bias.shape()) + " does not match n=" +
              std::to_string(n));
  Tensor q = matmul(traj_emb, params.w_q);
  Tensor k = matmul(traj_emb, params.w_k);
  Tensor v = matmul(traj_emb, params.w_v);
  Tensor logits =
      mul_scalar(add(matmul(q, transpose(k)), bias), 1.0 / std::sqrt(static_cast<double>(cfg.d)));

  Tensor weights;
  if (cfg.mask_mode == MaskMode::Paper) {
    Tensor mask = Tensor::zeros({n, n});
    for (int i = 0; i < valid_len; ++i)
      for (int j = 0; j < valid_len; ++j)
        mask.set(i * n + j, 1.0);
    weights = mul(softmax(logits, 1), mask);
  } else {
    std::vector<uint8_t> mask(static_cast<size_t>(n) * n, 0);
    for (int i = 0; i < valid_len; ++i)
      for (int j = 0; j < valid_len; ++j)
        mask[static_cast<size_t>(i) * n + j] = 1;
    weights = softmax_masked(logits, mask, 1);
  }
  if (training && cfg.dropout > 0.0) {
    require(rng != nullptr, "self_attention: training dropout needs an rng");
    weights = dropout(weights, cfg.dropout, *rng, true);
  }
  return matmul(weights, v);
}

Tensor attention_match(const Tensor& aggregated, const Tensor* candidate_bias, int valid_len,
                       ModelParams& params, const ModelConfig& cfg) {
  require(valid_len >= 1, "attention_match: no valid check-ins to match against");
  const int64_t L = params.num_locations;
  const int64_t n = aggregated.dim(0);
  std::vector<int64_t> ids(static_cast<size_t>(L));
  for (int64_t i = 0; i < L; ++i) ids[static_cast<size_t>(i)] = i + 1;
  Tensor cand_emb = gather_rows(params.loc_emb, ids);
  Tensor logits = matmul(cand_emb, transpose(aggregated));
  if (candidate_bias) {
    require(candidate_bias->dim(0) == L && candidate_bias->dim(1) == n,
            "attention_match: candidate bias shape " + shape_str(candidate_bias->shape()));
    logits = add(logits, *candidate_bias);
  }
  logits = mul_scalar(logits, 1.0 / std::sqrt(static_cast<double>(cfg.d)));
  Tensor weights = softmax(logits, 0);  // normalize over candidates at each position
  Tensor col_mask = Tensor::zeros({L, n});
  for (int64_t i = 0; i < L; ++i)
    for (int j = 0; j < valid_len; ++j)
      col_mask.set(i * n + j, 1.0);
  return sum_axis(mul(weights, col_mask), 1);
}

Tensor forward(const TrajectorySequence& seq, const RelationMatrices& rel,
               const CandidateRelation* cand, ModelParams& params, const ModelConfig& cfg,
               const IntervalBounds* bounds, bool training, Rng* rng) {
  Tensor emb = embed_trajectory(seq, params, cfg);
  if (training && cfg.dropout > 0.0) {
    require(rng != nullptr, "forward: training dropout needs an rng");
    emb = dropout(emb, cfg.dropout, *rng, true);
  }
  Tensor bias = interval_bias(rel, params, cfg, bounds);
  Tensor aggregated =
      self_attention_aggregate(emb, bias, seq.valid_len, params, cfg, training, rng);
  if (cand && cfg.use_candidate_intervals && (cfg.use_tim || cfg.use_sim)) {
    Tensor cb = candidate_interval_bias(*cand, params, cfg, bounds);
    return attention_match(aggregated, &cb, seq.valid_len, params, cfg);
  }
  return attention_match(aggregated, nullptr, seq.valid_len, params, cfg);
}

Tensor export_attention(const TrajectorySequence& seq, const RelationMatrices& rel,
                        ModelParams& params, const ModelConfig& cfg,
                        const IntervalBounds* bounds) {
  Tensor emb = embed_trajectory(seq, params, cfg);
  Tensor bias = interval_bias(rel, params, cfg, bounds);
  const int64_t n = emb.dim(0);
  Tensor q = matmul(emb, params.w_q);
  Tensor k = matmul(emb, params.w_k);
  Tensor logits =
      mul_scalar(add(matmul(q, transpose(k)), bias), 1.0 / std::sqrt(static_cast<double>(cfg.d)));
  if (cfg.mask_mode == MaskMode::Paper) {
    Tensor mask = Tensor::zeros({n, n});
    for (int i = 0; i < seq.valid_len; ++i)
      for (int j = 0; j < seq.valid_len; ++j)
        mask.set(i * n + j, 1.0);
    return mul(softmax(logits, 1), mask);
  }
  std::vector<uint8_t> mask(static_cast<size_t>(n) * n, 0);
  for (int i = 0; i < seq.valid_len; ++i)
    for (int j = 0; j < seq.valid_len; ++j)
      mask[static_cast<size_t>(i) * n + j] = 1;
  return softmax_masked(logits, mask, 1);
}

void save_params(const std::string& path, ModelParams& params) {
  std::vector<std::pair<std::string, const Tensor*>> arrays;
  for (auto& [name, t] : params.named()) arrays.emplace_back(name, t);
  save_arrays(path, arrays);
}

ModelParams load_params(const std::string& path) {
  std::map<std::string, Tensor> loaded;
  for (auto& [name, t] : load_arrays(path)) loaded.emplace(name, t);
  ModelParams p;
  for (auto& [name, dst] : p.named()) {
    auto it = loaded.find(name);
    require(it != loaded.end(), "checkpoint: missing array '" + name + "' in " + path);
    Tensor& src = it->second;
    *dst = Tensor::from_data(src.shape(), src.data(), /*requires_grad=*/true);
  }
  require(p.user_emb.rank() == 2 && p.loc_emb.rank() == 2, "checkpoint: malformed tables");
  p.num_users = static_cast<int>(p.user_emb.dim(0)) - 1;
  p.num_locations = static_cast<int>(p.loc_emb.dim(0)) - 1;
  p.d = static_cast<int>(p.loc_emb.dim(1));
  return p;
}

}  // namespace nextloc
