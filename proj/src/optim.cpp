#include "cgat/optim.hpp"

#include <cmath>

#include "cgat/errors.hpp"

namespace cgat::diff {

Adam::Adam(const ParamRegistry& registry, AdamConfig cfg) : cfg_(cfg) {
  for (ParamId id : registry.ids()) {
    const Tensor& v = registry.value(id);
    m_.emplace_back(v.rows(), v.cols());
    v_.emplace_back(v.rows(), v.cols());
  }
}

void Adam::step(ParamRegistry& registry, double eta) {
  if (registry.size() != m_.size()) throw ContractError("Adam: registry changed after construction");
  ++steps_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (ParamId id : registry.ids()) {
    if (!registry.trainable(id)) continue;
    Tensor& value = registry.value(id);
    const Tensor& grad = registry.grad(id);
    Tensor& m = m_[id.index()];
    Tensor& v = v_[id.index()];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      value[i] -= eta * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
    }
    if (!value.all_finite()) {
      throw NumericError("non-finite parameter after Adam update: " + registry.name(id));
    }
  }
  registry.zero_grad();
}

}  // namespace cgat::diff
