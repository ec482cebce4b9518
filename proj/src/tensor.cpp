#include "cgat/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "cgat/errors.hpp"

namespace cgat::diff {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw ContractError("tensor data length does not match shape");
}

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor(1, values.size(), std::vector<double>(values));
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

std::string Tensor::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void xavier_uniform(Tensor& t, RngStream& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
  uniform_fill(t, -bound, bound, rng);
}

void uniform_fill(Tensor& t, double lo, double hi, RngStream& rng) {
  for (double& v : t.data()) v = rng.uniform(lo, hi);
}

}  // namespace cgat::diff
