#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cgat/ids.hpp"
#include "cgat/tensor.hpp"

namespace cgat::diff {

using ParamId = Id<struct ParamTag>;

// Named learnable tensors with gradient accumulators.
class ParamRegistry {
 public:
  ParamId add(std::string name, Tensor value, bool trainable = true);
  std::optional<ParamId> find(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  const std::string& name(ParamId id) const { return entries_.at(id.index()).name; }
  Tensor& value(ParamId id) { return entries_.at(id.index()).value; }
  const Tensor& value(ParamId id) const { return entries_.at(id.index()).value; }
  Tensor& grad(ParamId id) { return entries_.at(id.index()).grad; }
  const Tensor& grad(ParamId id) const { return entries_.at(id.index()).grad; }
  bool trainable(ParamId id) const { return entries_.at(id.index()).trainable; }
  void set_trainable(ParamId id, bool on) { entries_.at(id.index()).trainable = on; }

  void zero_grad();
  std::vector<ParamId> ids() const;

 private:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, ParamId> by_name_;
};

class Tape;

// Handle to a node on a tape. Cheap to copy.
struct Var {
  static constexpr std::uint32_t kInvalid = UINT32_MAX;

  Tape* tape = nullptr;
  std::uint32_t id = kInvalid;

  bool valid() const { return tape != nullptr && id != kInvalid; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Reverse-mode recording of one forward pass. Parameter leaves read their
// values from the registry on first use and push gradients back into it when
// backward() runs. Single-threaded; several tapes may share a registry for
// forward-only work.
class Tape {
 public:
  using BackwardFn = void (*)(Tape&, std::uint32_t self);

  explicit Tape(ParamRegistry* params = nullptr) : params_(params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Whole parameter tensor; one node per parameter per tape.
  Var param(ParamId id);
  // Single row of a parameter (embedding lookup); one node per row per tape.
  Var param_row(ParamId id, std::size_t row);

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node, then
  // adds parameter-leaf gradients into the registry. May run once per tape.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  // Empty tensor when no gradient reached the node.
  const Tensor& grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Op-implementation interface.
  Var push(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn);
  Var push(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return push(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), fn);
  }
  std::span<const std::uint32_t> inputs(std::uint32_t node) const;
  const Tensor& node_value(std::uint32_t node) const { return nodes_[node].value; }
  const Tensor& node_grad(std::uint32_t node) const { return nodes_[node].grad; }
  // Gradient accumulator of a node, allocated as zeros on first access.
  Tensor& accumulator(std::uint32_t node);

 private:
  enum class Leaf : std::uint8_t { None, Param, Row };
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward = nullptr;
    std::uint32_t in_begin = 0;
    std::uint32_t in_count = 0;
    Leaf leaf = Leaf::None;
    ParamId param;
    std::size_t row = 0;
  };

  void check_own(Var v, const char* what) const;
  ParamRegistry& registry(const char* what);

  ParamRegistry* params_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> input_pool_;
  std::unordered_map<std::uint32_t, std::uint32_t> param_nodes_;
  std::unordered_map<std::uint64_t, std::uint32_t> row_nodes_;
  bool backward_done_ = false;
};

// Primitives. Vectors are 1 x n; shape mismatches throw ContractError and
// non-finite results throw NumericError naming the op.

// Horizontal concatenation (a || b) of tensors with equal row counts.
Var concat(Var a, Var b);
Var concat(std::span<const Var> parts);
// Stacks 1 x n rows into a k x n matrix.
Var stack_rows(std::span<const Var> rows);
Var matmul(Var x, Var w);
// x W + b, with the 1 x c bias broadcast over the rows of x W.
Var affine(Var x, Var w, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
// Elementwise log(sigmoid(a)), stable for large |a|.
Var log_sigmoid(Var a);
// Row-wise softmax.
Var softmax(Var a);
// s * a + (1 - s) * b elementwise.
Var gate(Var s, Var a, Var b);
// Sum of elementwise products, 1 x 1.
Var dot(Var a, Var b);
// Sum of all entries, 1 x 1.
Var sum(Var a);
// Sum of equally shaped tensors.
Var add_n(std::span<const Var> terms);
Var squared_norm(Var a);

}  // namespace cgat::diff
