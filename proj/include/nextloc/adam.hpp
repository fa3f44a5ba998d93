#pragma once

#include <cstdint>
#include <vector>

#include "nextloc/tensor.hpp"

namespace nextloc {

// Adam with bias correction. Moment buffers are indexed positionally, so the
// same parameter list must be passed on every step.
struct AdamState {
  double lr = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<std::vector<double>> m, v;
};

void adam_step(std::vector<Tensor>& params, AdamState& state);
void zero_grads(std::vector<Tensor>& params);

}  // namespace nextloc
