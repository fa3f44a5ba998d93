#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "nextloc/model.hpp"
#include "testutil.hpp"

using namespace nextloc;

namespace {

ModelParams make_params(int users, int locs, int d, uint64_t seed) {
  ModelConfig cfg;
  cfg.d = d;
  Rng rng(seed);
  return ModelParams::init(users, locs, cfg, rng);
}

void set_all(Tensor& t, double v) {
  for (double& x : t.data()) x = v;
}

TrajectorySequence toy_sequence(int n, const std::vector<int32_t>& locs,
                                const std::vector<int64_t>& times, int32_t user,
                                const std::vector<GeoPoint>& gps_table) {
  TrajectorySequence seq;
  seq.user_id = user;
  seq.valid_len = static_cast<int32_t>(locs.size());
  seq.entries.resize(static_cast<size_t>(n));
  for (size_t i = 0; i < locs.size(); ++i)
    seq.entries[i] = CheckIn{user, locs[i], times[i], gps_table[static_cast<size_t>(locs[i])]};
  return seq;
}

}  // namespace

TEST_CASE("embed_trajectory: zero tables give zero rows, padding stays zero") {
  ModelConfig cfg;
  cfg.d = 3;
  ModelParams p = make_params(2, 4, 3, 1);
  set_all(p.user_emb, 0.0);
  set_all(p.loc_emb, 0.0);
  set_all(p.time_emb, 0.0);
  std::vector<GeoPoint> gps(5, GeoPoint{1, 1});
  auto seq = toy_sequence(4, {1, 2}, {0, 3600}, 1, gps);
  Tensor e = embed_trajectory(seq, p, cfg);
  for (double v : e.data()) CHECK(v == 0.0);
}

TEST_CASE("embed_trajectory: valid_len zero gives an all-zero matrix") {
  ModelConfig cfg;
  cfg.d = 3;
  ModelParams p = make_params(2, 4, 3, 2);
  TrajectorySequence seq;
  seq.entries.resize(4);
  seq.valid_len = 0;
  Tensor e = embed_trajectory(seq, p, cfg);
  CHECK(e.dim(0) == 4);
  for (double v : e.data()) CHECK(v == 0.0);
}

TEST_CASE("embed_trajectory: rows are the scalar sum of the three lookups") {
  ModelConfig cfg;
  cfg.d = 2;
  ModelParams p = make_params(1, 3, 2, 3);
  // Hand-set tables so expected rows are simple sums.
  p.user_emb.data() = {0, 0, 10, 20};                    // user 1 -> [10,20]
  p.loc_emb.data() = {0, 0, 1, 2, 3, 4, 5, 6};           // loc i -> [2i-1, 2i]
  set_all(p.time_emb, 0.0);
  p.time_emb.data()[72 * 2] = 0.5;  // slot 72 (epoch 0) -> [0.5, 0.25]
  p.time_emb.data()[72 * 2 + 1] = 0.25;
  std::vector<GeoPoint> gps(4, GeoPoint{0, 0});
  auto seq = toy_sequence(3, {2, 3}, {0, 3600}, 1, gps);
  Tensor e = embed_trajectory(seq, p, cfg);
  CHECK(e.at(0, 0) == doctest::Approx(10 + 3 + 0.5));
  CHECK(e.at(0, 1) == doctest::Approx(20 + 4 + 0.25));
  CHECK(e.at(1, 0) == doctest::Approx(10 + 5 + 0.0));  // slot 73 is zero
  CHECK(e.at(2, 0) == 0.0);
}

TEST_CASE("embed_trajectory: out-of-range ids are fatal") {
  ModelConfig cfg;
  cfg.d = 2;
  ModelParams p = make_params(1, 2, 2, 4);
  std::vector<GeoPoint> gps(8, GeoPoint{0, 0});
  auto seq = toy_sequence(2, {7}, {0}, 1, gps);  // location 7 > L=2
  CHECK_THROWS_AS(embed_trajectory(seq, p, cfg), std::runtime_error);
}

TEST_CASE("per-entry interval embeddings") {
  Tensor unit = Tensor::from_data({2}, {0.1, -0.2});
  auto vec = interval_vector_unit(2.5, unit);
  CHECK(vec[0] == doctest::Approx(0.25));
  CHECK(vec[1] == doctest::Approx(-0.5));

  Tensor sup = Tensor::from_data({1}, {1.0});
  Tensor inf = Tensor::from_data({1}, {0.0});
  auto mid = interval_vector_interp(5.0, sup, inf, 0.0, 10.0);
  CHECK(mid[0] == doctest::Approx(0.5));  // halfway between sup and inf

  auto clamped = interval_vector_interp(25.0, sup, inf, 0.0, 10.0);
  CHECK(clamped[0] == doctest::Approx(0.0));  // clamps to the inf end

  auto degenerate = interval_vector_interp(3.0, sup, inf, 2.0, 2.0);
  CHECK(degenerate[0] == 1.0);  // upper == lower collapses to sup
}

TEST_CASE("interval bias: disabled flags produce exact zeros") {
  ModelConfig cfg;
  cfg.d = 2;
  cfg.use_tim = false;
  cfg.use_sim = false;
  ModelParams p = make_params(1, 2, 2, 5);
  RelationMatrices rel;
  rel.n = 3;
  rel.valid_len = 2;
  rel.delta_t_hours = {0, 1, 0, 1, 0, 0, 0, 0, 0};
  rel.delta_s_hm = rel.delta_t_hours;
  Tensor bias = interval_bias(rel, p, cfg, nullptr);
  for (double v : bias.data()) CHECK(v == 0.0);
  CHECK_FALSE(bias.requires_grad());
}

TEST_CASE("interval bias: unit mode is homogeneous in the intervals") {
  ModelConfig cfg;
  cfg.d = 3;
  ModelParams p = make_params(1, 2, 3, 6);
  set_all(p.w_reduce_t, 0.3);
  set_all(p.w_reduce_s, -0.1);
  RelationMatrices rel;
  rel.n = 2;
  rel.valid_len = 2;
  rel.delta_t_hours = {0, 2, 2, 0};
  rel.delta_s_hm = {0, 5, 5, 0};
  Tensor b1 = interval_bias(rel, p, cfg, nullptr);
  RelationMatrices doubled = rel;
  for (double& v : doubled.delta_t_hours) v *= 2.0;
  for (double& v : doubled.delta_s_hm) v *= 2.0;
  Tensor b2 = interval_bias(doubled, p, cfg, nullptr);
  for (size_t i = 0; i < b1.data().size(); ++i)
    CHECK(b2.data()[i] == doctest::Approx(2.0 * b1.data()[i]).epsilon(1e-15));
  // Per-entry vectors double exactly as well.
  auto v1 = interval_vector_unit(2.0, p.unit_t);
  auto v2 = interval_vector_unit(4.0, p.unit_t);
  for (size_t i = 0; i < v1.size(); ++i) CHECK(v2[i] == 2.0 * v1[i]);
}

TEST_CASE("interval bias: interpolation keeps padded entries at zero") {
  ModelConfig cfg;
  cfg.d = 2;
  cfg.interval_mode = IntervalMode::Interpolation;
  ModelParams p = make_params(1, 2, 2, 7);
  set_all(p.w_reduce_t, 1.0);
  set_all(p.w_reduce_s, 1.0);
  set_all(p.sup_t, 2.0);  // nonzero sup would leak into padded cells if unmasked
  set_all(p.sup_s, 2.0);
  RelationMatrices rel;
  rel.n = 3;
  rel.valid_len = 2;
  rel.delta_t_hours.assign(9, 0.0);
  rel.delta_s_hm.assign(9, 0.0);
  rel.delta_t_hours[1] = rel.delta_t_hours[3] = 4.0;
  IntervalBounds bounds{0.0, 4.0, 0.0, 4.0};
  Tensor bias = interval_bias(rel, p, cfg, &bounds);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i >= 2 || j >= 2) CHECK(bias.at(i, j) == 0.0);
    }
  // Degenerate bounds: every valid entry reduces through the sup vector.
  IntervalBounds degen{1.0, 1.0, 1.0, 1.0};
  Tensor bias2 = interval_bias(rel, p, cfg, &degen);
  CHECK(bias2.at(0, 0) == doctest::Approx(8.0));  // dot(sup_t,w)+dot(sup_s,w) = 4+4
  CHECK(bias2.at(2, 2) == 0.0);
}

TEST_CASE("aggregation: single valid slot in paper mode keeps 1/n of the value row") {
  const int n = 4, d = 3;
  ModelConfig cfg;
  cfg.d = d;
  ModelParams p = make_params(1, 3, d, 8);
  set_all(p.w_q, 0.0);
  set_all(p.w_k, 0.0);
  Rng rng(9);
  Tensor emb = Tensor::uniform({n, d}, -1.0, 1.0, rng);
  for (int j = 0; j < d; ++j)
    for (int i = 1; i < n; ++i) emb.set(i * d + j, 0.0);  // single valid row
  Tensor bias = Tensor::zeros({n, n});
  Tensor s = self_attention_aggregate(emb, bias, 1, p, cfg);
  // Uniform logits over n columns, only column 0 unmasked: weight 1/n on V0.
  std::vector<double> v0(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j) {
    double acc = 0.0;
    for (int k = 0; k < d; ++k) acc += emb.at(0, k) * p.w_v.at(k, j);
    v0[static_cast<size_t>(j)] = acc;
  }
  for (int j = 0; j < d; ++j)
    CHECK(s.at(0, j) == doctest::Approx(v0[static_cast<size_t>(j)] / n).epsilon(1e-12));
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < d; ++j) CHECK(s.at(i, j) == 0.0);
}

TEST_CASE("aggregation: zero projections in presoftmax mode average the value rows") {
  const int n = 3, d = 2;
  ModelConfig cfg;
  cfg.d = d;
  cfg.mask_mode = MaskMode::PreSoftmax;
  ModelParams p = make_params(1, 3, d, 10);
  set_all(p.w_q, 0.0);
  set_all(p.w_k, 0.0);
  Rng rng(11);
  Tensor emb = Tensor::uniform({n, d}, -1.0, 1.0, rng);
  Tensor bias = Tensor::zeros({n, n});
  Tensor s = self_attention_aggregate(emb, bias, n, p, cfg);
  Tensor v = matmul(emb, p.w_v);
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += v.at(i, j);
    mean /= n;
    for (int i = 0; i < n; ++i) CHECK(s.at(i, j) == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("aggregation: a huge bias entry saturates the softmax") {
  const int n = 3, d = 2;
  ModelConfig cfg;
  cfg.d = d;
  cfg.mask_mode = MaskMode::PreSoftmax;
  ModelParams p = make_params(1, 3, d, 12);
  Rng rng(13);
  Tensor emb = Tensor::uniform({n, d}, -1.0, 1.0, rng);
  Tensor bias = Tensor::zeros({n, n});
  bias.set(0 * n + 2, 1e6);
  Tensor s = self_attention_aggregate(emb, bias, n, p, cfg);
  Tensor v = matmul(emb, p.w_v);
  for (int j = 0; j < d; ++j) CHECK(std::fabs(s.at(0, j) - v.at(2, j)) < 1e-6);
}

TEST_CASE("aggregation: valid_len zero degenerates to all-zero output") {
  const int n = 3, d = 2;
  ModelConfig cfg;
  cfg.d = d;
  ModelParams p = make_params(1, 3, d, 14);
  Tensor emb = Tensor::zeros({n, d});
  Tensor bias = Tensor::zeros({n, n});
  for (auto mode : {MaskMode::Paper, MaskMode::PreSoftmax}) {
    cfg.mask_mode = mode;
    Tensor s = self_attention_aggregate(emb, bias, 0, p, cfg);
    for (double x : s.data()) CHECK(x == 0.0);
  }
}

TEST_CASE("matching: identical candidate embeddings score identically") {
  const int d = 3, L = 4, n = 3;
  ModelConfig cfg;
  cfg.d = d;
  ModelParams p = make_params(1, L, d, 15);
  for (int c = 1; c <= L; ++c)
    for (int j = 0; j < d; ++j) p.loc_emb.set(c * d + j, 0.7 - 0.1 * j);
  Rng rng(16);
  Tensor agg = Tensor::uniform({n, d}, -1.0, 1.0, rng);
  Tensor a = attention_match(agg, nullptr, 2, p, cfg);
  for (int c = 1; c < L; ++c) CHECK(a.at(c) == doctest::Approx(a.at(0)).epsilon(1e-12));
  double sum = 0.0;
  for (int c = 0; c < L; ++c) sum += a.at(c);
  CHECK(sum == doctest::Approx(2.0).epsilon(1e-9));  // one unit of mass per valid column
}

TEST_CASE("matching: a dominant logit takes all the mass") {
  const int d = 2, L = 2, n = 2;
  ModelConfig cfg;
  cfg.d = d;
  ModelParams p = make_params(1, L, d, 17);
  // Candidate 1 aligned with the single valid column, candidate 2 opposed.
  p.loc_emb.data() = {0, 0, 50, 0, -50, 0};
  Tensor agg = Tensor::from_data({n, d}, {1.0, 0.0, 0.0, 0.0});
  Tensor a = attention_match(agg, nullptr, 1, p, cfg);
  CHECK(a.at(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(a.at(1) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("matching: three candidates match the per-column softmax oracle") {
  const int d = 3, L = 3, n = 4;
  ModelConfig cfg;
  cfg.d = d;
  ModelParams p = make_params(1, L, d, 18);
  Rng rng(19);
  Tensor agg = Tensor::uniform({n, d}, -1.5, 1.5, rng);
  Tensor bias = Tensor::uniform({L, n}, -0.5, 0.5, rng);
  const int v = 2;
  Tensor a = attention_match(agg, &bias, v, p, cfg);

  std::vector<double> want(L, 0.0);
  for (int j = 0; j < v; ++j) {
    std::vector<double> col(L);
    for (int c = 0; c < L; ++c) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += p.loc_emb.at(c + 1, k) * agg.at(j, k);
      col[static_cast<size_t>(c)] = (s + bias.at(c, j)) / std::sqrt(static_cast<double>(d));
    }
    auto sm = testutil::ref_softmax(col);
    for (int c = 0; c < L; ++c) want[static_cast<size_t>(c)] += sm[static_cast<size_t>(c)];
  }
  for (int c = 0; c < L; ++c) CHECK(std::fabs(a.at(c) - want[static_cast<size_t>(c)]) < 1e-12);
}

TEST_CASE("matching: no valid positions is fatal") {
  ModelConfig cfg;
  cfg.d = 2;
  ModelParams p = make_params(1, 2, 2, 20);
  Tensor agg = Tensor::zeros({3, 2});
  CHECK_THROWS_AS(attention_match(agg, nullptr, 0, p, cfg), std::runtime_error);
}

TEST_CASE("matching column softmax preserves repeat accumulation (small brute force)") {
  // Appending one more occurrence column (identical logits) never lowers the
  // duplicated candidate's score. loc_emb is the scaled identity so the
  // aggregated rows carry the logits directly.
  for (int L = 2; L <= 5; ++L) {
    for (int base_cols = 1; base_cols <= 3; ++base_cols) {
      for (uint64_t seed = 1; seed <= 12; ++seed) {
        Rng rng(seed * 1000 + static_cast<uint64_t>(L * 10 + base_cols));
        const int d = L;
        ModelConfig cfg;
        cfg.d = d;
        ModelParams p = make_params(1, L, d, seed);
        for (int c = 1; c <= L; ++c)
          for (int j = 0; j < d; ++j)
            p.loc_emb.set(c * d + j, c - 1 == j ? std::sqrt(static_cast<double>(d)) : 0.0);

        const int x = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(L)));
        std::vector<double> dup_col(static_cast<size_t>(L));
        for (int c = 0; c < L; ++c) dup_col[static_cast<size_t>(c)] = rng.uniform(-2.0, 2.0);

        const int n = base_cols + 1;
        Tensor agg_k = Tensor::zeros({n, d});
        Tensor agg_k1 = Tensor::zeros({n, d});
        for (int j = 0; j < base_cols; ++j)
          for (int c = 0; c < L; ++c) {
            const double z = rng.uniform(-2.0, 2.0);
            agg_k.set(j * d + c, z);
            agg_k1.set(j * d + c, z);
          }
        for (int c = 0; c < L; ++c) agg_k1.set(base_cols * d + c, dup_col[static_cast<size_t>(c)]);
        // agg_k already contains one occurrence column: overwrite its first column.
        for (int c = 0; c < L; ++c) agg_k.set(0 * d + c, dup_col[static_cast<size_t>(c)]);
        for (int c = 0; c < L; ++c) agg_k1.set(0 * d + c, dup_col[static_cast<size_t>(c)]);

        Tensor a_k = attention_match(agg_k, nullptr, base_cols, p, cfg);
        Tensor a_k1 = attention_match(agg_k1, nullptr, base_cols + 1, p, cfg);
        CHECK(a_k1.at(x) >= a_k.at(x) - 1e-12);
      }
    }
  }
}

TEST_CASE("forward: ablated intervals equal zeroed interval inputs bitwise") {
  const int n = 4, d = 2, L = 3;
  ModelConfig cfg;
  cfg.d = d;
  cfg.n = n;
  ModelParams p = make_params(2, L, d, 21);
  std::vector<GeoPoint> gps = {{}, {0, 0}, {0.5, 0.5}, {1, 1}};
  auto seq = toy_sequence(n, {1, 2, 3}, {0, 3600, 9000}, 1, gps);
  RelationMatrices rel = trajectory_relation(seq);
  CandidateRelation cand = candidate_relation(gps, seq, 12000);

  ModelConfig ablated = cfg;
  ablated.use_tim = false;
  ablated.use_sim = false;
  Tensor a1 = forward(seq, rel, &cand, p, ablated, nullptr);

  RelationMatrices zero_rel = rel;
  std::fill(zero_rel.delta_t_hours.begin(), zero_rel.delta_t_hours.end(), 0.0);
  std::fill(zero_rel.delta_s_hm.begin(), zero_rel.delta_s_hm.end(), 0.0);
  CandidateRelation zero_cand = cand;
  std::fill(zero_cand.n_t_hours.begin(), zero_cand.n_t_hours.end(), 0.0);
  std::fill(zero_cand.n_s_hm.begin(), zero_cand.n_s_hm.end(), 0.0);
  Tensor a2 = forward(seq, zero_rel, &zero_cand, p, cfg, nullptr);

  REQUIRE(a1.numel() == a2.numel());
  for (int i = 0; i < a1.numel(); ++i) CHECK(a1.at(i) == a2.at(i));
}

TEST_CASE("forward: padding content is inert, bitwise") {
  const int n = 5, d = 3, L = 4;
  ModelConfig cfg;
  cfg.d = d;
  cfg.n = n;
  ModelParams p = make_params(2, L, d, 22);
  std::vector<GeoPoint> gps = {{}, {0, 0}, {0.5, 0.5}, {1, 1}, {2, 2}};
  auto seq = toy_sequence(n, {1, 2}, {0, 3600}, 1, gps);
  seq.label_time = 7200;

  auto run = [&](const TrajectorySequence& s) {
    RelationMatrices rel = trajectory_relation(s);
    CandidateRelation cand = candidate_relation(gps, s, s.label_time);
    return forward(s, rel, &cand, p, cfg, nullptr);
  };
  Tensor base = run(seq);

  TrajectorySequence perturbed = seq;
  Rng rng(23);
  for (int i = seq.valid_len; i < n; ++i) {
    perturbed.entries[static_cast<size_t>(i)] =
        CheckIn{1, static_cast<int32_t>(1 + rng.uniform_below(L)),
                static_cast<int64_t>(rng.uniform_below(100000)),
                {rng.uniform(-80, 80), rng.uniform(-170, 170)}};
  }
  Tensor after = run(perturbed);
  for (int i = 0; i < base.numel(); ++i) CHECK(base.at(i) == after.at(i));
}

TEST_CASE("forward matches the hand-unrolled scalar model") {
  const int n = 4, d = 2, L = 3;
  ModelConfig cfg;
  cfg.d = d;
  cfg.n = n;
  ModelParams p = make_params(2, L, d, 24);
  Rng rng(25);
  for (auto& [name, t] : p.named()) {
    if (name == "user_emb" || name == "loc_emb") {
      for (size_t i = static_cast<size_t>(d); i < t->data().size(); ++i)
        t->data()[i] = rng.uniform(-0.8, 0.8);
    } else {
      for (double& x : t->data()) x = rng.uniform(-0.8, 0.8);
    }
  }

  std::vector<GeoPoint> gps = {{}, {40.7, -74.0}, {40.8, -73.9}, {40.9, -73.8}};
  auto seq = toy_sequence(n, {1, 3, 1}, {1000, 720000, 1500000}, 2, gps);
  seq.label_time = 2000000;
  RelationMatrices rel = trajectory_relation(seq);
  CandidateRelation cand = candidate_relation(gps, seq, seq.label_time);
  Tensor a = forward(seq, rel, &cand, p, cfg, nullptr);

  testutil::ScalarModel sm;
  sm.num_users = 2;
  sm.num_locations = L;
  sm.d = d;
  sm.n = n;
  sm.user_emb = p.user_emb.data();
  sm.loc_emb = p.loc_emb.data();
  sm.time_emb = p.time_emb.data();
  sm.w_q = p.w_q.data();
  sm.w_k = p.w_k.data();
  sm.w_v = p.w_v.data();
  sm.unit_t = p.unit_t.data();
  sm.unit_s = p.unit_s.data();
  sm.w_reduce_t = p.w_reduce_t.data();
  sm.w_reduce_s = p.w_reduce_s.data();
  sm.w_reduce_nt = p.w_reduce_nt.data();
  sm.w_reduce_ns = p.w_reduce_ns.data();

  testutil::ScalarInputs in;
  in.user = 2;
  in.valid_len = seq.valid_len;
  in.loc_ids = {1, 3, 1, 0};
  in.hour_slots.resize(static_cast<size_t>(n), 0);
  for (int i = 0; i < seq.valid_len; ++i)
    in.hour_slots[static_cast<size_t>(i)] = hour_of_week(seq.entries[static_cast<size_t>(i)].timestamp);
  in.delta_t = rel.delta_t_hours;
  in.delta_s = rel.delta_s_hm;
  in.n_t = cand.n_t_hours;
  in.n_s = cand.n_s_hm;

  auto want = testutil::scalar_forward(sm, in);
  for (int c = 0; c < L; ++c) CHECK(std::fabs(a.at(c) - want[static_cast<size_t>(c)]) < 1e-12);
}

TEST_CASE("export_attention: zero parameters spread mass uniformly in paper mode") {
  const int n = 4, d = 2, L = 3;
  ModelConfig cfg;
  cfg.d = d;
  cfg.n = n;
  ModelParams p = make_params(1, L, d, 26);
  for (auto& [name, t] : p.named()) set_all(*t, 0.0);
  std::vector<GeoPoint> gps = {{}, {0, 0}, {1, 1}, {2, 2}};
  auto seq = toy_sequence(n, {1, 2}, {0, 3600}, 1, gps);
  RelationMatrices rel = trajectory_relation(seq);
  Tensor w = export_attention(seq, rel, p, cfg, nullptr);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < n; ++j)
      CHECK(w.at(i, j) == doctest::Approx(j < 2 ? 0.25 : 0.0).epsilon(1e-12));
}

TEST_CASE("export_attention row sums: paper <= 1, presoftmax valid rows == 1") {
  const int n = 5, d = 3, L = 4;
  ModelConfig cfg;
  cfg.d = d;
  cfg.n = n;
  ModelParams p = make_params(1, L, d, 27);
  std::vector<GeoPoint> gps = {{}, {0, 0}, {1, 1}, {2, 2}, {3, 3}};
  auto seq = toy_sequence(n, {1, 2, 3}, {0, 3600, 7200}, 1, gps);
  RelationMatrices rel = trajectory_relation(seq);

  Tensor w = export_attention(seq, rel, p, cfg, nullptr);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += w.at(i, j);
    CHECK(sum <= 1.0 + 1e-12);
  }

  cfg.mask_mode = MaskMode::PreSoftmax;
  Tensor w2 = export_attention(seq, rel, p, cfg, nullptr);
  for (int i = 0; i < seq.valid_len; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += w2.at(i, j);
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("params checkpoint round-trip") {
  ModelParams p = make_params(3, 5, 4, 28);
  const std::string path = "params_roundtrip.bin";
  save_params(path, p);
  ModelParams q = load_params(path);
  CHECK(q.num_users == 3);
  CHECK(q.num_locations == 5);
  CHECK(q.d == 4);
  auto pn = p.named();
  auto qn = q.named();
  for (size_t i = 0; i < pn.size(); ++i) {
    REQUIRE(qn[i].second->shape() == pn[i].second->shape());
    for (size_t j = 0; j < pn[i].second->data().size(); ++j)
      CHECK(qn[i].second->data()[j] == pn[i].second->data()[j]);
  }
  std::remove(path.c_str());
}
