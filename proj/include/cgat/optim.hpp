#pragma once

#include <cstdint>
#include <vector>

#include "cgat/autodiff.hpp"

namespace cgat::diff {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over the trainable tensors of a registry.
class Adam {
 public:
  explicit Adam(const ParamRegistry& registry, AdamConfig cfg = {});

  // Applies one update with learning rate eta, then zeroes all gradients.
  void step(ParamRegistry& registry, double eta);
  std::uint64_t steps() const { return steps_; }

 private:
  AdamConfig cfg_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace cgat::diff
