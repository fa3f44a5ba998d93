#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "nextloc/tensor.hpp"

namespace testutil {

inline bool close_rel(double a, double b, double rtol, double floor = 1e-4) {
  return std::fabs(a - b) <= rtol * std::max({std::fabs(a), std::fabs(b), floor});
}

// Central finite differences of a scalar-valued function of one tensor's
// entries, compared against the recorded analytic gradient.
struct GradCheck {
  double max_rel_err = 0.0;
  bool ok = true;
};

inline GradCheck check_gradient(nextloc::Tensor& param,
                                const std::function<nextloc::Tensor()>& loss_fn,
                                double step = 1e-5, double rtol = 1e-3) {
  nextloc::Tensor loss = loss_fn();
  loss.backward();
  std::vector<double> analytic = param.grad();
  GradCheck result;
  for (size_t i = 0; i < param.data().size(); ++i) {
    const double saved = param.data()[i];
    param.data()[i] = saved + step;
    const double up = loss_fn().value();
    param.data()[i] = saved - step;
    const double down = loss_fn().value();
    param.data()[i] = saved;
    const double fd = (up - down) / (2.0 * step);
    const double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-4});
    const double rel = std::fabs(fd - analytic[i]) / denom;
    result.max_rel_err = std::max(result.max_rel_err, rel);
    if (rel > rtol) result.ok = false;
  }
  return result;
}

// Scalar reference implementations, kept independent of the tensor engine.
inline std::vector<double> ref_softmax(const std::vector<double>& x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  std::vector<double> y(x.size());
  double denom = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - mx);
    denom += y[i];
  }
  for (double& v : y) v /= denom;
  return y;
}

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Pearson chi-square statistic for observed counts against a uniform law.
inline double chi_square_uniform(const std::vector<long long>& counts, long long total) {
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double stat = 0.0;
  for (long long c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return stat;
}

// A fully hand-unrolled scalar model, independent of the tensor engine. Unit
// interval mode, no dropout. Matrices are plain row-major vectors.
struct ScalarModel {
  int num_users = 0, num_locations = 0, d = 0, n = 0;
  std::vector<double> user_emb, loc_emb, time_emb;  // (U+1)*d, (L+1)*d, 168*d
  std::vector<double> w_q, w_k, w_v;                // d*d
  std::vector<double> unit_t, unit_s, w_reduce_t, w_reduce_s, w_reduce_nt, w_reduce_ns;
  bool use_tim = true, use_sim = true, use_candidate_intervals = true;
  bool paper_mask = true;
};

struct ScalarInputs {
  int user = 0;
  int valid_len = 0;
  std::vector<int> loc_ids;    // size n, 0 padding
  std::vector<int> hour_slots; // size n
  std::vector<double> delta_t, delta_s;  // n*n, zero outside the valid block
  std::vector<double> n_t, n_s;          // L*n, zero on padded columns
};

inline std::vector<double> scalar_forward(const ScalarModel& m, const ScalarInputs& in) {
  const int n = m.n, d = m.d, L = m.num_locations;
  auto dotv = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += a[static_cast<size_t>(i)] * b[static_cast<size_t>(i)];
    return s;
  };
  std::vector<double> emb(static_cast<size_t>(n) * d, 0.0);
  for (int i = 0; i < in.valid_len; ++i)
    for (int j = 0; j < d; ++j)
      emb[static_cast<size_t>(i) * d + j] =
          m.user_emb[static_cast<size_t>(in.user) * d + j] +
          m.loc_emb[static_cast<size_t>(in.loc_ids[static_cast<size_t>(i)]) * d + j] +
          m.time_emb[static_cast<size_t>(in.hour_slots[static_cast<size_t>(i)]) * d + j];

  auto project = [&](const std::vector<double>& w) {
    std::vector<double> out(static_cast<size_t>(n) * d, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int k = 0; k < d; ++k)
          s += emb[static_cast<size_t>(i) * d + k] * w[static_cast<size_t>(k) * d + j];
        out[static_cast<size_t>(i) * d + j] = s;
      }
    return out;
  };
  std::vector<double> q = project(m.w_q), k = project(m.w_k), v = project(m.w_v);

  const double ct = m.use_tim ? dotv(m.unit_t, m.w_reduce_t) : 0.0;
  const double cs = m.use_sim ? dotv(m.unit_s, m.w_reduce_s) : 0.0;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> logits(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int kk = 0; kk < d; ++kk)
        s += q[static_cast<size_t>(i) * d + kk] * k[static_cast<size_t>(j) * d + kk];
      const double bias = (m.use_tim ? in.delta_t[static_cast<size_t>(i) * n + j] * ct : 0.0) +
                          (m.use_sim ? in.delta_s[static_cast<size_t>(i) * n + j] * cs : 0.0);
      logits[static_cast<size_t>(i) * n + j] = (s + bias) * scale;
    }

  std::vector<double> weights(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (m.paper_mask) {
      std::vector<double> row(logits.begin() + static_cast<int64_t>(i) * n,
                              logits.begin() + static_cast<int64_t>(i + 1) * n);
      std::vector<double> sm = ref_softmax(row);
      for (int j = 0; j < n; ++j)
        weights[static_cast<size_t>(i) * n + j] =
            (i < in.valid_len && j < in.valid_len) ? sm[static_cast<size_t>(j)] : 0.0;
    } else if (i < in.valid_len) {
      std::vector<double> row(logits.begin() + static_cast<int64_t>(i) * n,
                              logits.begin() + static_cast<int64_t>(i) * n + in.valid_len);
      std::vector<double> sm = ref_softmax(row);
      for (int j = 0; j < in.valid_len; ++j)
        weights[static_cast<size_t>(i) * n + j] = sm[static_cast<size_t>(j)];
    }
  }
  std::vector<double> agg(static_cast<size_t>(n) * d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int kk = 0; kk < n; ++kk)
        s += weights[static_cast<size_t>(i) * n + kk] * v[static_cast<size_t>(kk) * d + j];
      agg[static_cast<size_t>(i) * d + j] = s;
    }

  const double cnt = m.use_tim ? dotv(m.unit_t, m.w_reduce_nt) : 0.0;
  const double cns = m.use_sim ? dotv(m.unit_s, m.w_reduce_ns) : 0.0;
  std::vector<double> mlogits(static_cast<size_t>(L) * n, 0.0);
  for (int c = 0; c < L; ++c)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int kk = 0; kk < d; ++kk)
        s += m.loc_emb[static_cast<size_t>(c + 1) * d + kk] * agg[static_cast<size_t>(j) * d + kk];
      double bias = 0.0;
      if (m.use_candidate_intervals) {
        bias = (m.use_tim ? in.n_t[static_cast<size_t>(c) * n + j] * cnt : 0.0) +
               (m.use_sim ? in.n_s[static_cast<size_t>(c) * n + j] * cns : 0.0);
      }
      mlogits[static_cast<size_t>(c) * n + j] = (s + bias) * scale;
    }

  std::vector<double> scores(static_cast<size_t>(L), 0.0);
  for (int j = 0; j < in.valid_len; ++j) {
    std::vector<double> col(static_cast<size_t>(L));
    for (int c = 0; c < L; ++c) col[static_cast<size_t>(c)] = mlogits[static_cast<size_t>(c) * n + j];
    std::vector<double> sm = ref_softmax(col);
    for (int c = 0; c < L; ++c) scores[static_cast<size_t>(c)] += sm[static_cast<size_t>(c)];
  }
  return scores;
}

// Scalar form of the training loss: scores centered on their mean, sigmoid
// cross-entropy over the label and the sampled negatives (0-based indices).
inline double scalar_loss(const std::vector<double>& scores, int label,
                          const std::vector<int>& negatives) {
  double mean = 0.0;
  for (double v : scores) mean += v;
  mean /= static_cast<double>(scores.size());
  double loss = -std::log(ref_sigmoid(scores[static_cast<size_t>(label)] - mean));
  for (int j : negatives)
    loss += -std::log(1.0 - ref_sigmoid(scores[static_cast<size_t>(j)] - mean));
  return loss;
}

}  // namespace testutil
