#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "cgat/autodiff.hpp"
#include "cgat/rng.hpp"

namespace cgat::diff {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // "<param>[<index>]: analytic=..., numeric=..."
};

// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor);

// Compares analytic gradients with central differences
// (f(theta + eps) - f(theta - eps)) / (2 eps) on up to `coords_per_param`
// randomly chosen coordinates of each listed parameter. `objective(true)`
// must evaluate f at the registry's current values and accumulate df/dtheta
// into the registry gradients (which are zeroed first); `objective(false)`
// only evaluates f. Parameter values are restored afterwards.
GradCheckReport finite_difference_check(ParamRegistry& registry,
                                        const std::function<double(bool)>& objective,
                                        std::span<const ParamId> params,
                                        std::size_t coords_per_param, double eps, RngStream& rng,
                                        double floor = 1e-6);

}  // namespace cgat::diff
