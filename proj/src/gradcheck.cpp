#include "cgat/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace cgat::diff {

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

GradCheckReport finite_difference_check(ParamRegistry& registry,
                                        const std::function<double(bool)>& objective,
                                        std::span<const ParamId> params,
                                        std::size_t coords_per_param, double eps, RngStream& rng,
                                        double floor) {
  registry.zero_grad();
  objective(true);

  GradCheckReport report;
  for (ParamId id : params) {
    const std::size_t n = registry.value(id).size();
    std::vector<std::size_t> coords(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    if (n > coords_per_param) {
      rng.shuffle(std::span(coords));
      coords.resize(coords_per_param);
    }
    for (std::size_t k : coords) {
      const double analytic = registry.grad(id)[k];
      double& theta = registry.value(id)[k];
      const double saved = theta;
      theta = saved + eps;
      const double up = objective(false);
      theta = saved - eps;
      const double down = objective(false);
      theta = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic, numeric, floor);
      ++report.coordinates;
      if (err > report.max_rel_error || report.worst.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        report.worst = fmt::format("{}[{}]: analytic={:.10g}, numeric={:.10g}", registry.name(id), k,
                                   analytic, numeric);
      }
    }
  }
  registry.zero_grad();
  return report;
}

}  // namespace cgat::diff
