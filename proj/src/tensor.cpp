#include "nextloc/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

#include "nextloc/types.hpp"

namespace nextloc {

namespace {

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::shared_ptr<TensorNode> make_node(std::vector<int64_t> shape) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data.assign(static_cast<size_t>(shape_numel(n->shape)), 0.0);
  return n;
}

// Result node wired to its parents; backprop filled in by the caller when
// any parent participates in differentiation.
std::shared_ptr<TensorNode> make_result(std::vector<int64_t> shape,
                                        std::vector<std::shared_ptr<TensorNode>> parents) {
  auto n = make_node(std::move(shape));
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  n->requires_grad = rg;
  if (rg) n->parents = std::move(parents);
  return n;
}

// C = A(p x q) * B(q x r), accumulating: C += A*B. ikj order for locality.
void matmul_acc(const double* a, const double* b, double* c, int64_t p, int64_t q, int64_t r) {
  for (int64_t i = 0; i < p; ++i) {
    const double* arow = a + i * q;
    double* crow = c + i * r;
    for (int64_t k = 0; k < q; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b + k * r;
      for (int64_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
    }
  }
}

// C += A^T(q x p)^T ... i.e. C(p x r) += A(q x p)^T * B(q x r)
void matmul_at_b_acc(const double* a, const double* b, double* c, int64_t q, int64_t p, int64_t r) {
  for (int64_t k = 0; k < q; ++k) {
    const double* arow = a + k * p;
    const double* brow = b + k * r;
    for (int64_t i = 0; i < p; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c + i * r;
      for (int64_t j = 0; j < r; ++j) crow[j] += aki * brow[j];
    }
  }
}

// C(p x q) += A(p x r) * B(q x r)^T
void matmul_a_bt_acc(const double* a, const double* b, double* c, int64_t p, int64_t r, int64_t q) {
  for (int64_t i = 0; i < p; ++i) {
    const double* arow = a + i * r;
    double* crow = c + i * q;
    for (int64_t j = 0; j < q; ++j) {
      const double* brow = b + j * r;
      double s = 0.0;
      for (int64_t k = 0; k < r; ++k) s += arow[k] * brow[k];
      crow[j] += s;
    }
  }
}

}  // namespace

std::string shape_str(const std::vector<int64_t>& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(std::vector<int64_t> shape, bool requires_grad) {
  auto n = make_node(std::move(shape));
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::full(std::vector<int64_t> shape, double value, bool requires_grad) {
  auto n = make_node(std::move(shape));
  for (double& x : n->data) x = value;
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::from_data(std::vector<int64_t> shape, std::vector<double> data,
                         bool requires_grad) {
  require(shape_numel(shape) == static_cast<int64_t>(data.size()),
          "tensor: data length " + std::to_string(data.size()) + " does not match shape " +
              shape_str(shape));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::uniform(std::vector<int64_t> shape, double lo, double hi, Rng& rng,
                       bool requires_grad) {
  auto n = make_node(std::move(shape));
  for (double& x : n->data) x = rng.uniform(lo, hi);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

std::vector<double>& Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::value() const {
  require(numel() == 1, "tensor: value() on non-scalar of shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(int64_t i) const { return node_->data[static_cast<size_t>(i)]; }

double Tensor::at(int64_t i, int64_t j) const {
  return node_->data[static_cast<size_t>(i * dim(1) + j)];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  require(numel() == 1, "backward: loss must be a scalar, got shape " + shape_str(shape()));
  // Topological order over the recorded history (parents before children),
  // then a reverse sweep accumulating gradients across fan-out.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  if (node_->requires_grad) stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [cur, idx] = stack.back();
    if (idx < cur->parents.size()) {
      TensorNode* p = cur->parents[idx++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(cur);
      stack.pop_back();
    }
  }
  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop();
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int64_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
  auto out = make_result({p, r}, {a.node(), b.node()});
  matmul_acc(a.data().data(), b.data().data(), out->data.data(), p, q, r);
  if (out->requires_grad) {
    auto an = a.node(), bn = b.node();
    TensorNode* o = out.get();
    out->backprop = [an, bn, o, p, q, r]() {
      if (an->requires_grad) {
        an->ensure_grad();  // dA = G * B^T
        matmul_a_bt_acc(o->grad.data(), bn->data.data(), an->grad.data(), p, r, q);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();  // dB = A^T * G
        matmul_at_b_acc(an->data.data(), o->grad.data(), bn->grad.data(), p, q, r);
      }
    };
  }
  return Tensor(out);
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose: rank-2 expected, got " + shape_str(a.shape()));
  const int64_t p = a.dim(0), q = a.dim(1);
  auto out = make_result({q, p}, {a.node()});
  for (int64_t i = 0; i < p; ++i)
    for (int64_t j = 0; j < q; ++j)
      out->data[static_cast<size_t>(j * p + i)] = a.at(i, j);
  if (out->requires_grad) {
    auto an = a.node();
    TensorNode* o = out.get();
    out->backprop = [an, o, p, q]() {
      an->ensure_grad();
      for (int64_t i = 0; i < p; ++i)
        for (int64_t j = 0; j < q; ++j)
          an->grad[static_cast<size_t>(i * q + j)] += o->grad[static_cast<size_t>(j * p + i)];
    };
  }
  return Tensor(out);
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  auto out = make_result(a.shape(), {a.node(), b.node()});
  const size_t n = a.data().size();
  for (size_t i = 0; i < n; ++i) out->data[i] = a.data()[i] + b.data()[i];
  if (out->requires_grad) {
    auto an = a.node(), bn = b.node();
    TensorNode* o = out.get();
    out->backprop = [an, bn, o]() {
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) bn->grad[i] += o->grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  auto out = make_result(a.shape(), {a.node(), b.node()});
  const size_t n = a.data().size();
  for (size_t i = 0; i < n; ++i) out->data[i] = a.data()[i] - b.data()[i];
  if (out->requires_grad) {
    auto an = a.node(), bn = b.node();
    TensorNode* o = out.get();
    out->backprop = [an, bn, o]() {
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) bn->grad[i] -= o->grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  auto out = make_result(a.shape(), {a.node(), b.node()});
  const size_t n = a.data().size();
  for (size_t i = 0; i < n; ++i) out->data[i] = a.data()[i] * b.data()[i];
  if (out->requires_grad) {
    auto an = a.node(), bn = b.node();
    TensorNode* o = out.get();
    out->backprop = [an, bn, o]() {
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) bn->grad[i] += o->grad[i] * an->data[i];
      }
    };
  }
  return Tensor(out);
}

Tensor add_scalar(const Tensor& a, double c) {
  auto out = make_result(a.shape(), {a.node()});
  for (size_t i = 0; i < a.data().size(); ++i) out->data[i] = a.data()[i] + c;
  if (out->requires_grad) {
    auto an = a.node();
    TensorNode* o = out.get();
    out->backprop = [an, o]() {
      an->ensure_grad();
      for (size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
    };
  }
  return Tensor(out);
}

Tensor mul_scalar(const Tensor& a, double c) {
  auto out = make_result(a.shape(), {a.node()});
  for (size_t i = 0; i < a.data().size(); ++i) out->data[i] = a.data()[i] * c;
  if (out->requires_grad) {
    auto an = a.node();
    TensorNode* o = out.get();
    out->backprop = [an, o, c]() {
      an->ensure_grad();
      for (size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i] * c;
    };
  }
  return Tensor(out);
}

Tensor add_rowvec(const Tensor& mat, const Tensor& row) {
  require(mat.rank() == 2 && row.numel() == mat.dim(1),
          "add_rowvec: shapes " + shape_str(mat.shape()) + " vs " + shape_str(row.shape()));
  const int64_t p = mat.dim(0), q = mat.dim(1);
  auto out = make_result(mat.shape(), {mat.node(), row.node()});
  for (int64_t i = 0; i < p; ++i)
    for (int64_t j = 0; j < q; ++j)
      out->data[static_cast<size_t>(i * q + j)] = mat.at(i, j) + row.data()[static_cast<size_t>(j)];
  if (out->requires_grad) {
    auto mn = mat.node(), rn = row.node();
    TensorNode* o = out.get();
    out->backprop = [mn, rn, o, p, q]() {
      if (mn->requires_grad) {
        mn->ensure_grad();
        for (size_t i = 0; i < o->grad.size(); ++i) mn->grad[i] += o->grad[i];
      }
      if (rn->requires_grad) {
        rn->ensure_grad();
        for (int64_t i = 0; i < p; ++i)
          for (int64_t j = 0; j < q; ++j)
            rn->grad[static_cast<size_t>(j)] += o->grad[static_cast<size_t>(i * q + j)];
      }
    };
  }
  return Tensor(out);
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  require(s.numel() == 1, "scale_by: scale must have one element, got " + shape_str(s.shape()));
  auto out = make_result(x.shape(), {x.node(), s.node()});
  const double sv = s.data()[0];
  for (size_t i = 0; i < x.data().size(); ++i) out->data[i] = x.data()[i] * sv;
  if (out->requires_grad) {
    auto xn = x.node(), sn = s.node();
    TensorNode* o = out.get();
    out->backprop = [xn, sn, o]() {
      if (xn->requires_grad) {
        xn->ensure_grad();
        const double sv = sn->data[0];
        for (size_t i = 0; i < o->grad.size(); ++i) xn->grad[i] += o->grad[i] * sv;
      }
      if (sn->requires_grad) {
        sn->ensure_grad();
        double acc = 0.0;
        for (size_t i = 0; i < o->grad.size(); ++i) acc += o->grad[i] * xn->data[i];
        sn->grad[0] += acc;
      }
    };
  }
  return Tensor(out);
}

Tensor exp(const Tensor& a) {
  auto out = make_result(a.shape(), {a.node()});
  for (size_t i = 0; i < a.data().size(); ++i) out->data[i] = std::exp(a.data()[i]);
  if (out->requires_grad) {
    auto an = a.node();
    TensorNode* o = out.get();
    out->backprop = [an, o]() {
      an->ensure_grad();
      for (size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i] * o->data[i];
    };
  }
  return Tensor(out);
}

Tensor log(const Tensor& a) {
  auto out = make_result(a.shape(), {a.node()});
  for (size_t i = 0; i < a.data().size(); ++i) out->data[i] = std::log(a.data()[i]);
  if (out->requires_grad) {
    auto an = a.node();
    TensorNode* o = out.get();
    out->backprop = [an, o]() {
      an->ensure_grad();
      for (size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i] / an->data[i];
    };
  }
  return Tensor(out);
}

Tensor sigmoid(const Tensor& a) {
  auto out = make_result(a.shape(), {a.node()});
  for (size_t i = 0; i < a.data().size(); ++i) {
    const double x = a.data()[i];
    out->data[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  if (out->requires_grad) {
    auto an = a.node();
    TensorNode* o = out.get();
    out->backprop = [an, o]() {
      an->ensure_grad();
      for (size_t i = 0; i < o->grad.size(); ++i) {
        const double y = o->data[i];
        an->grad[i] += o->grad[i] * y * (1.0 - y);
      }
    };
  }
  return Tensor(out);
}

namespace {

// Shared softmax core. axis 1: each row is one slice; axis 0: each column.
// mask may be empty (all entries valid). Fully-masked slices produce zeros.
void softmax_forward(const std::vector<double>& x, std::vector<double>& y, int64_t rows,
                     int64_t cols, int axis, const std::vector<uint8_t>& mask) {
  const int64_t slices = axis == 1 ? rows : cols;
  const int64_t len = axis == 1 ? cols : rows;
  for (int64_t s = 0; s < slices; ++s) {
    auto idx = [&](int64_t k) {
      return static_cast<size_t>(axis == 1 ? s * cols + k : k * cols + s);
    };
    double mx = -1e308;
    bool any = false;
    for (int64_t k = 0; k < len; ++k) {
      if (!mask.empty() && !mask[idx(k)]) continue;
      any = true;
      mx = std::max(mx, x[idx(k)]);
    }
    if (!any) {
      for (int64_t k = 0; k < len; ++k) y[idx(k)] = 0.0;
      continue;
    }
    double denom = 0.0;
    for (int64_t k = 0; k < len; ++k) {
      if (!mask.empty() && !mask[idx(k)]) {
        y[idx(k)] = 0.0;
      } else {
        const double e = std::exp(x[idx(k)] - mx);
        y[idx(k)] = e;
        denom += e;
      }
    }
    for (int64_t k = 0; k < len; ++k) y[idx(k)] /= denom;
  }
}

void softmax_backward(const std::vector<double>& y, const std::vector<double>& gy,
                      std::vector<double>& gx, int64_t rows, int64_t cols, int axis) {
  const int64_t slices = axis == 1 ? rows : cols;
  const int64_t len = axis == 1 ? cols : rows;
  for (int64_t s = 0; s < slices; ++s) {
    auto idx = [&](int64_t k) {
      return static_cast<size_t>(axis == 1 ? s * cols + k : k * cols + s);
    };
    double inner = 0.0;
    for (int64_t k = 0; k < len; ++k) inner += gy[idx(k)] * y[idx(k)];
    for (int64_t k = 0; k < len; ++k) gx[idx(k)] += y[idx(k)] * (gy[idx(k)] - inner);
  }
}

Tensor softmax_impl(const Tensor& a, int axis, const std::vector<uint8_t>& mask) {
  int64_t rows, cols;
  if (a.rank() == 1) {
    require(axis == 0, "softmax: rank-1 tensors use axis 0");
    rows = 1;
    cols = a.dim(0);
    axis = 1;  // treat the vector as a single row
  } else {
    require(a.rank() == 2 && (axis == 0 || axis == 1),
            "softmax: rank-2 with axis 0 or 1 expected, got " + shape_str(a.shape()));
    rows = a.dim(0);
    cols = a.dim(1);
  }
  auto out = make_result(a.shape(), {a.node()});
  softmax_forward(a.data(), out->data, rows, cols, axis, mask);
  if (out->requires_grad) {
    auto an = a.node();
    TensorNode* o = out.get();
    out->backprop = [an, o, rows, cols, axis]() {
      an->ensure_grad();
      softmax_backward(o->data, o->grad, an->grad, rows, cols, axis);
    };
  }
  return Tensor(out);
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) { return softmax_impl(a, axis, {}); }

Tensor softmax_masked(const Tensor& a, const std::vector<uint8_t>& mask, int axis) {
  require(mask.size() == a.data().size(), "softmax_masked: mask size mismatch");
  return softmax_impl(a, axis, mask);
}

Tensor sum_axis(const Tensor& a, int axis) {
  require(a.rank() == 2 && (axis == 0 || axis == 1),
          "sum_axis: rank-2 with axis 0 or 1 expected, got " + shape_str(a.shape()));
  const int64_t rows = a.dim(0), cols = a.dim(1);
  const int64_t out_len = axis == 1 ? rows : cols;
  auto out = make_result({out_len}, {a.node()});
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j)
      out->data[static_cast<size_t>(axis == 1 ? i : j)] += a.at(i, j);
  if (out->requires_grad) {
    auto an = a.node();
    TensorNode* o = out.get();
    out->backprop = [an, o, rows, cols, axis]() {
      an->ensure_grad();
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j)
          an->grad[static_cast<size_t>(i * cols + j)] +=
              o->grad[static_cast<size_t>(axis == 1 ? i : j)];
    };
  }
  return Tensor(out);
}

Tensor sum_all(const Tensor& a) {
  auto out = make_result({1}, {a.node()});
  double s = 0.0;
  for (double v : a.data()) s += v;
  out->data[0] = s;
  if (out->requires_grad) {
    auto an = a.node();
    TensorNode* o = out.get();
    out->backprop = [an, o]() {
      an->ensure_grad();
      for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += o->grad[0];
    };
  }
  return Tensor(out);
}

Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training) {
  if (!training || rate <= 0.0) return a;  // eval mode is the identity
  require(rate < 1.0, "dropout: rate must be < 1");
  const double keep = 1.0 - rate;
  auto out = make_result(a.shape(), {a.node()});
  auto mask = std::make_shared<std::vector<double>>(a.data().size());
  for (size_t i = 0; i < a.data().size(); ++i) {
    (*mask)[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
    out->data[i] = a.data()[i] * (*mask)[i];
  }
  if (out->requires_grad) {
    auto an = a.node();
    TensorNode* o = out.get();
    out->backprop = [an, o, mask]() {
      an->ensure_grad();
      for (size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i] * (*mask)[i];
    };
  }
  return Tensor(out);
}

Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& ids) {
  require(table.rank() == 2, "gather_rows: table must be rank-2, got " + shape_str(table.shape()));
  const int64_t rows = table.dim(0), width = table.dim(1);
  for (int64_t id : ids)
    require(id >= 0 && id < rows,
            "gather_rows: id " + std::to_string(id) + " out of range [0," + std::to_string(rows) + ")");
  auto out = make_result({static_cast<int64_t>(ids.size()), width}, {table.node()});
  for (size_t i = 0; i < ids.size(); ++i)
    std::memcpy(out->data.data() + i * static_cast<size_t>(width),
                table.data().data() + static_cast<size_t>(ids[i]) * static_cast<size_t>(width),
                sizeof(double) * static_cast<size_t>(width));
  if (out->requires_grad) {
    auto tn = table.node();
    TensorNode* o = out.get();
    auto ids_copy = std::make_shared<std::vector<int64_t>>(ids);
    out->backprop = [tn, o, ids_copy, width]() {
      tn->ensure_grad();  // repeated ids accumulate into the same row
      for (size_t i = 0; i < ids_copy->size(); ++i) {
        double* dst = tn->grad.data() + static_cast<size_t>((*ids_copy)[i]) * static_cast<size_t>(width);
        const double* src = o->grad.data() + i * static_cast<size_t>(width);
        for (int64_t j = 0; j < width; ++j) dst[j] += src[j];
      }
    };
  }
  return Tensor(out);
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require(a.numel() == b.numel(),
          "dot: length mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  auto out = make_result({1}, {a.node(), b.node()});
  double s = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
  out->data[0] = s;
  if (out->requires_grad) {
    auto an = a.node(), bn = b.node();
    TensorNode* o = out.get();
    out->backprop = [an, bn, o]() {
      const double g = o->grad[0];
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += g * bn->data[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < bn->grad.size(); ++i) bn->grad[i] += g * an->data[i];
      }
    };
  }
  return Tensor(out);
}

namespace {

double softplus(double x) {  // log(1 + e^x), overflow-safe
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

double logistic(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

Tensor sampled_sigmoid_ce(const Tensor& scores, int64_t label,
                          const std::vector<int64_t>& negatives, uint64_t* sigma_counter) {
  require(scores.rank() == 1, "loss: scores must be a vector, got " + shape_str(scores.shape()));
  const int64_t L = scores.numel();
  require(label >= 0 && label < L, "loss: label index out of range");
  for (int64_t j : negatives) {
    require(j >= 0 && j < L, "loss: negative index out of range");
    require(j != label, "loss: label must not appear among negatives");
  }
  double mean = 0.0;
  for (double v : scores.data()) mean += v;
  mean /= static_cast<double>(L);

  auto out = make_result({1}, {scores.node()});
  // -log sigma(z_label) - sum_j log(1 - sigma(z_j)), z = score - mean.
  double loss = softplus(-(scores.at(label) - mean));
  for (int64_t j : negatives) loss += softplus(scores.at(j) - mean);
  out->data[0] = loss;
  if (sigma_counter) *sigma_counter += 1 + negatives.size();

  if (out->requires_grad) {
    auto sn = scores.node();
    TensorNode* o = out.get();
    auto negs = std::make_shared<std::vector<int64_t>>(negatives);
    out->backprop = [sn, o, negs, label, mean, L]() {
      sn->ensure_grad();
      const double g = o->grad[0];
      // Sparse part, plus the uniform correction from the mean-centering.
      double total = 0.0;
      {
        const double gl = logistic(sn->data[static_cast<size_t>(label)] - mean) - 1.0;
        sn->grad[static_cast<size_t>(label)] += g * gl;
        total += gl;
      }
      for (int64_t j : *negs) {
        const double gj = logistic(sn->data[static_cast<size_t>(j)] - mean);
        sn->grad[static_cast<size_t>(j)] += g * gj;
        total += gj;
      }
      const double corr = g * total / static_cast<double>(L);
      for (int64_t i = 0; i < L; ++i) sn->grad[static_cast<size_t>(i)] -= corr;
    };
  }
  return Tensor(out);
}

}  // namespace nextloc
