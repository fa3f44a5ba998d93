#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "nextloc/rng.hpp"

namespace nextloc {

// Dense 64-bit tensor with a recorded computation history for reverse-mode
// differentiation. A Tensor is a cheap handle onto a shared node; ops build
// new nodes that remember their parents and how to push gradients back.
struct TensorNode {
  std::vector<int64_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily, same length as data
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backprop;  // accumulates this node's grad into parents

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

  static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<int64_t> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<int64_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor uniform(std::vector<int64_t> shape, double lo, double hi, Rng& rng,
                        bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int64_t>& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int64_t dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return node_->numel(); }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool requires_grad() const { return node_->requires_grad; }

  double value() const;                      // scalar tensors only
  double at(int64_t i) const;                // rank-1
  double at(int64_t i, int64_t j) const;     // rank-2
  void set(int64_t i, double v) { node_->data[static_cast<size_t>(i)] = v; }

  void zero_grad();
  void backward() const;  // scalar loss entry point

  std::shared_ptr<TensorNode>& node() { return node_; }
  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

std::string shape_str(const std::vector<int64_t>& s);

// --- ops --------------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise; also used for masking
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& mat, const Tensor& row);  // broadcast row over all rows
Tensor scale_by(const Tensor& x, const Tensor& s);        // multiply by a 1-element tensor
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softmax(const Tensor& a, int axis);  // rank-2 (axis 0: down columns, 1: along rows); rank-1: axis 0
// Softmax restricted to mask!=0 entries; fully-masked slices yield all zeros.
Tensor softmax_masked(const Tensor& a, const std::vector<uint8_t>& mask, int axis);
Tensor sum_axis(const Tensor& a, int axis);  // rank-2 -> rank-1
Tensor sum_all(const Tensor& a);             // -> scalar
Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training);
Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& ids);
Tensor dot(const Tensor& a, const Tensor& b);  // vectors -> scalar

// Sampled sigmoid cross-entropy over matching scores. Scores are centered on
// their mean before the sigmoid, so a constant score vector is exactly the
// (s+1)*ln2 anchor. Numerically stable softplus form. sigma_counter, when
// given, is advanced by the number of sigmoid score terms (1 + negatives).
Tensor sampled_sigmoid_ce(const Tensor& scores, int64_t label,
                          const std::vector<int64_t>& negatives,
                          uint64_t* sigma_counter = nullptr);

}  // namespace nextloc
