#include "nextloc/adam.hpp"

#include <cmath>

#include "nextloc/types.hpp"

namespace nextloc {

void adam_step(std::vector<Tensor>& params, AdamState& st) {
  if (st.m.empty()) {
    st.m.resize(params.size());
    st.v.resize(params.size());
    for (size_t p = 0; p < params.size(); ++p) {
      st.m[p].assign(params[p].data().size(), 0.0);
      st.v[p].assign(params[p].data().size(), 0.0);
    }
  }
  require(st.m.size() == params.size(), "adam: parameter list changed between steps");
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (size_t p = 0; p < params.size(); ++p) {
    auto& data = params[p].data();
    auto& grad = params[p].grad();
    require(st.m[p].size() == data.size(), "adam: parameter shape changed between steps");
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      st.m[p][i] = st.beta1 * st.m[p][i] + (1.0 - st.beta1) * g;
      st.v[p][i] = st.beta2 * st.v[p][i] + (1.0 - st.beta2) * g * g;
      const double mhat = st.m[p][i] / bc1;
      const double vhat = st.v[p][i] / bc2;
      data[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace nextloc
