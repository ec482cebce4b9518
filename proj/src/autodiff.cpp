#include "cgat/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "cgat/errors.hpp"

namespace cgat::diff {

ParamId ParamRegistry::add(std::string name, Tensor value, bool trainable) {
  if (by_name_.contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  const ParamId id(entries_.size());
  Tensor grad(value.rows(), value.cols());
  by_name_.emplace(name, id);
  entries_.push_back({std::move(name), std::move(value), std::move(grad), trainable});
  return id;
}

std::optional<ParamId> ParamRegistry::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

void ParamRegistry::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

std::vector<ParamId> ParamRegistry::ids() const {
  std::vector<ParamId> out;
  for (std::size_t i = 0; i < entries_.size(); ++i) out.emplace_back(i);
  return out;
}

const Tensor& Var::value() const {
  if (!valid()) throw ContractError("use of an unset Var");
  return tape->value(*this);
}

void Tape::check_own(Var v, const char* what) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw ContractError(std::string(what) + ": Var does not belong to this tape");
  }
}

ParamRegistry& Tape::registry(const char* what) {
  if (params_ == nullptr) throw ContractError(std::string(what) + ": tape has no parameter registry");
  return *params_;
}

Var Tape::constant(Tensor value) { return push("constant", std::move(value), {}, nullptr); }

Var Tape::param(ParamId id) {
  auto it = param_nodes_.find(id.value);
  if (it != param_nodes_.end()) return Var{this, it->second};
  Var v = push("param", registry("param").value(id), {}, nullptr);
  nodes_[v.id].leaf = Leaf::Param;
  nodes_[v.id].param = id;
  param_nodes_.emplace(id.value, v.id);
  return v;
}

Var Tape::param_row(ParamId id, std::size_t row) {
  const std::uint64_t key = (static_cast<std::uint64_t>(id.value) << 40) | row;
  auto it = row_nodes_.find(key);
  if (it != row_nodes_.end()) return Var{this, it->second};
  const Tensor& table = registry("param_row").value(id);
  if (row >= table.rows()) throw ContractError("param_row: row out of range");
  Var v = push("param_row", Tensor::row(table.row_span(row)), {}, nullptr);
  nodes_[v.id].leaf = Leaf::Row;
  nodes_[v.id].param = id;
  nodes_[v.id].row = row;
  row_nodes_.emplace(key, v.id);
  return v;
}

Var Tape::push(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  for (Var in : inputs) check_own(in, op);
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  Node node;
  node.value = std::move(value);
  node.backward = fn;
  node.in_begin = static_cast<std::uint32_t>(input_pool_.size());
  node.in_count = static_cast<std::uint32_t>(inputs.size());
  for (Var in : inputs) input_pool_.push_back(in.id);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

std::span<const std::uint32_t> Tape::inputs(std::uint32_t node) const {
  const Node& n = nodes_[node];
  return {input_pool_.data() + n.in_begin, n.in_count};
}

Tensor& Tape::accumulator(std::uint32_t node) {
  Node& n = nodes_[node];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

const Tensor& Tape::value(Var v) const {
  check_own(v, "value");
  return nodes_[v.id].value;
}

const Tensor& Tape::grad(Var v) const {
  check_own(v, "grad");
  return nodes_[v.id].grad;
}

void Tape::backward(Var loss) {
  if (!loss.valid()) throw ContractError("backward: no forward pass recorded for this loss");
  check_own(loss, "backward");
  if (backward_done_) throw ContractError("backward: already run on this tape");
  const Tensor& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + lv.shape_string());
  }
  backward_done_ = true;
  accumulator(loss.id)[0] = 1.0;
  for (std::uint32_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward != nullptr) n.backward(*this, i);
  }
  if (params_ == nullptr) return;
  for (Node& n : nodes_) {
    if (n.leaf == Leaf::None || n.grad.empty()) continue;
    Tensor& g = params_->grad(n.param);
    if (n.leaf == Leaf::Param) {
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    } else {
      auto dst = g.row_span(n.row);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    }
  }
}

namespace {

void require(bool ok, const char* op, const std::string& msg) {
  if (!ok) throw ContractError(std::string(op) + ": " + msg);
}

void require_same(Var a, Var b, const char* op) {
  require(a.tape == b.tape, op, "operands live on different tapes");
  require(a.value().same_shape(b.value()), op,
          "shape mismatch " + a.value().shape_string() + " vs " + b.value().shape_string());
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F>
Var unary(const char* op, Var a, F f, Tape::BackwardFn fn) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape->push(op, std::move(y), {a}, fn);
}

}  // namespace

Var concat(Var a, Var b) {
  require(a.tape == b.tape, "concat", "operands live on different tapes");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require(x.rows() == y.rows(), "concat", "row counts differ");
  Tensor out(x.rows(), x.cols() + y.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::copy_n(x.row_span(r).begin(), x.cols(), out.row_span(r).begin());
    std::copy_n(y.row_span(r).begin(), y.cols(), out.row_span(r).begin() + x.cols());
  }
  return a.tape->push("concat", std::move(out), {a, b}, [](Tape& t, std::uint32_t self) {
    const auto in = t.inputs(self);
    const Tensor& g = t.node_grad(self);
    const std::size_t left = t.node_value(in[0]).cols();
    for (int side = 0; side < 2; ++side) {
      Tensor& acc = t.accumulator(in[side]);
      const std::size_t offset = side == 0 ? 0 : left;
      for (std::size_t r = 0; r < acc.rows(); ++r) {
        for (std::size_t c = 0; c < acc.cols(); ++c) acc(r, c) += g(r, offset + c);
      }
    }
  });
}

Var concat(std::span<const Var> parts) {
  require(!parts.empty(), "concat", "no operands");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    require(p.tape == parts[0].tape, "concat", "operands live on different tapes");
    require(p.rows() == rows, "concat", "row counts differ");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& x = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(x.row_span(r).begin(), x.cols(), out.row_span(r).begin() + offset);
    }
    offset += x.cols();
  }
  return parts[0].tape->push("concat", std::move(out), parts, [](Tape& t, std::uint32_t self) {
    const Tensor& g = t.node_grad(self);
    std::size_t offset = 0;
    for (std::uint32_t in : t.inputs(self)) {
      Tensor& acc = t.accumulator(in);
      for (std::size_t r = 0; r < acc.rows(); ++r) {
        for (std::size_t c = 0; c < acc.cols(); ++c) acc(r, c) += g(r, offset + c);
      }
      offset += acc.cols();
    }
  });
}

Var stack_rows(std::span<const Var> rows) {
  require(!rows.empty(), "stack_rows", "no rows");
  const std::size_t n = rows[0].cols();
  Tensor out(rows.size(), n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].tape == rows[0].tape, "stack_rows", "operands live on different tapes");
    const Tensor& x = rows[r].value();
    require(x.rows() == 1 && x.cols() == n, "stack_rows", "rows must all be 1x" + std::to_string(n));
    std::copy_n(x.data().begin(), n, out.row_span(r).begin());
  }
  return rows[0].tape->push("stack_rows", std::move(out), rows, [](Tape& t, std::uint32_t self) {
    const auto in = t.inputs(self);
    const Tensor& g = t.node_grad(self);
    for (std::size_t r = 0; r < in.size(); ++r) {
      Tensor& acc = t.accumulator(in[r]);
      const auto src = g.row_span(r);
      for (std::size_t c = 0; c < acc.cols(); ++c) acc[c] += src[c];
    }
  });
}

namespace {

void matmul_into(const Tensor& x, const Tensor& w, Tensor& out) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double* o = out.row_span(i).data();
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double xv = x(i, k);
      if (xv == 0.0) continue;
      const double* wr = w.row_span(k).data();
      for (std::size_t j = 0; j < w.cols(); ++j) o[j] += xv * wr[j];
    }
  }
}

// Shared backward of matmul/affine: dX += G W^T, dW += X^T G, db += sum_rows G.
void matmul_backward(Tape& t, std::uint32_t self) {
  const auto in = t.inputs(self);
  const Tensor& g = t.node_grad(self);
  const Tensor& x = t.node_value(in[0]);
  const Tensor& w = t.node_value(in[1]);
  {
    Tensor& dx = t.accumulator(in[0]);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double* gr = g.row_span(i).data();
      for (std::size_t k = 0; k < x.cols(); ++k) {
        const double* wr = w.row_span(k).data();
        double s = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) s += gr[j] * wr[j];
        dx(i, k) += s;
      }
    }
  }
  {
    Tensor& dw = t.accumulator(in[1]);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double* gr = g.row_span(i).data();
      for (std::size_t k = 0; k < x.cols(); ++k) {
        const double xv = x(i, k);
        if (xv == 0.0) continue;
        double* dwr = dw.row_span(k).data();
        for (std::size_t j = 0; j < w.cols(); ++j) dwr[j] += xv * gr[j];
      }
    }
  }
  if (in.size() == 3) {
    Tensor& db = t.accumulator(in[2]);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) db[j] += g(i, j);
    }
  }
}

}  // namespace

Var matmul(Var x, Var w) {
  require(x.tape == w.tape, "matmul", "operands live on different tapes");
  const Tensor& a = x.value();
  const Tensor& b = w.value();
  require(a.cols() == b.rows(), "matmul",
          "shape mismatch " + a.shape_string() + " * " + b.shape_string());
  Tensor out(a.rows(), b.cols());
  matmul_into(a, b, out);
  return x.tape->push("matmul", std::move(out), {x, w}, matmul_backward);
}

Var affine(Var x, Var w, Var b) {
  require(x.tape == w.tape && x.tape == b.tape, "affine", "operands live on different tapes");
  const Tensor& a = x.value();
  const Tensor& m = w.value();
  const Tensor& bias = b.value();
  require(a.cols() == m.rows(), "affine",
          "shape mismatch " + a.shape_string() + " * " + m.shape_string());
  require(bias.rows() == 1 && bias.cols() == m.cols(), "affine",
          "bias must be 1x" + std::to_string(m.cols()) + ", got " + bias.shape_string());
  Tensor out(a.rows(), m.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy_n(bias.data().begin(), m.cols(), out.row_span(i).begin());
  }
  matmul_into(a, m, out);
  return x.tape->push("affine", std::move(out), {x, w, b}, matmul_backward);
}

Var add(Var a, Var b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return a.tape->push("add", std::move(out), {a, b}, [](Tape& t, std::uint32_t self) {
    const Tensor& g = t.node_grad(self);
    for (std::uint32_t in : t.inputs(self)) {
      Tensor& acc = t.accumulator(in);
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return a.tape->push("sub", std::move(out), {a, b}, [](Tape& t, std::uint32_t self) {
    const auto in = t.inputs(self);
    const Tensor& g = t.node_grad(self);
    Tensor& da = t.accumulator(in[0]);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
    Tensor& db = t.accumulator(in[1]);
    for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return a.tape->push("mul", std::move(out), {a, b}, [](Tape& t, std::uint32_t self) {
    const auto in = t.inputs(self);
    const Tensor& g = t.node_grad(self);
    const Tensor& x = t.node_value(in[0]);
    const Tensor& y = t.node_value(in[1]);
    Tensor& da = t.accumulator(in[0]);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
    Tensor& db = t.accumulator(in[1]);
    for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * x[i];
  });
}

Var scale(Var a, double factor) {
  // BackwardFn is a plain function pointer; the factor rides along as a 1x1
  // constant input.
  Var f = a.tape->constant(Tensor(1, 1, factor));
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.tape->push("scale", std::move(out), {a, f}, [](Tape& t, std::uint32_t self) {
    const auto in = t.inputs(self);
    const Tensor& g = t.node_grad(self);
    const double factor = t.node_value(in[1])[0];
    Tensor& da = t.accumulator(in[0]);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * factor;
  });
}

Var add_scalar(Var a, double offset) {
  Tensor out = a.value();
  for (double& v : out.data()) v += offset;
  return a.tape->push("add_scalar", std::move(out), {a}, [](Tape& t, std::uint32_t self) {
    const Tensor& g = t.node_grad(self);
    Tensor& da = t.accumulator(t.inputs(self)[0]);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
  });
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](Tape& t, std::uint32_t self) {
    const Tensor& g = t.node_grad(self);
    const Tensor& y = t.node_value(self);
    Tensor& da = t.accumulator(t.inputs(self)[0]);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](Tape& t, std::uint32_t self) {
                 const std::uint32_t in = t.inputs(self)[0];
                 const Tensor& g = t.node_grad(self);
                 const Tensor& x = t.node_value(in);
                 Tensor& da = t.accumulator(in);
                 for (std::size_t i = 0; i < g.size(); ++i) {
                   if (x[i] > 0.0) da[i] += g[i];
                 }
               });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, stable_sigmoid, [](Tape& t, std::uint32_t self) {
    const Tensor& g = t.node_grad(self);
    const Tensor& y = t.node_value(self);
    Tensor& da = t.accumulator(t.inputs(self)[0]);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var log_sigmoid(Var a) {
  return unary("log_sigmoid", a,
               [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); },
               [](Tape& t, std::uint32_t self) {
                 const std::uint32_t in = t.inputs(self)[0];
                 const Tensor& g = t.node_grad(self);
                 const Tensor& x = t.node_value(in);
                 Tensor& da = t.accumulator(in);
                 for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * stable_sigmoid(-x[i]);
               });
}

Var softmax(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row_span(r);
    auto o = out.row_span(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (double& v : o) v /= total;
  }
  return a.tape->push("softmax", std::move(out), {a}, [](Tape& t, std::uint32_t self) {
    const Tensor& g = t.node_grad(self);
    const Tensor& y = t.node_value(self);
    Tensor& da = t.accumulator(t.inputs(self)[0]);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double inner = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) inner += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) da(r, c) += y(r, c) * (g(r, c) - inner);
    }
  });
}

Var gate(Var s, Var a, Var b) {
  require_same(s, a, "gate");
  require_same(a, b, "gate");
  const Tensor& sv = s.value();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(sv.rows(), sv.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sv[i] * av[i] + (1.0 - sv[i]) * bv[i];
  return s.tape->push("gate", std::move(out), {s, a, b}, [](Tape& t, std::uint32_t self) {
    const auto in = t.inputs(self);
    const Tensor& g = t.node_grad(self);
    const Tensor& sv = t.node_value(in[0]);
    const Tensor& av = t.node_value(in[1]);
    const Tensor& bv = t.node_value(in[2]);
    Tensor& ds = t.accumulator(in[0]);
    for (std::size_t i = 0; i < g.size(); ++i) ds[i] += g[i] * (av[i] - bv[i]);
    Tensor& da = t.accumulator(in[1]);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * sv[i];
    Tensor& db = t.accumulator(in[2]);
    for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * (1.0 - sv[i]);
  });
}

Var dot(Var a, Var b) {
  require_same(a, b, "dot");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return a.tape->push("dot", Tensor(1, 1, s), {a, b}, [](Tape& t, std::uint32_t self) {
    const auto in = t.inputs(self);
    const double g = t.node_grad(self)[0];
    const Tensor& x = t.node_value(in[0]);
    const Tensor& y = t.node_value(in[1]);
    Tensor& da = t.accumulator(in[0]);
    for (std::size_t i = 0; i < x.size(); ++i) da[i] += g * y[i];
    Tensor& db = t.accumulator(in[1]);
    for (std::size_t i = 0; i < x.size(); ++i) db[i] += g * x[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape->push("sum", Tensor(1, 1, s), {a}, [](Tape& t, std::uint32_t self) {
    const double g = t.node_grad(self)[0];
    Tensor& da = t.accumulator(t.inputs(self)[0]);
    for (double& v : da.data()) v += g;
  });
}

Var add_n(std::span<const Var> terms) {
  require(!terms.empty(), "add_n", "no terms");
  Tensor out = terms[0].value();
  for (std::size_t k = 1; k < terms.size(); ++k) {
    require_same(terms[0], terms[k], "add_n");
    const Tensor& y = terms[k].value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  }
  return terms[0].tape->push("add_n", std::move(out), terms, [](Tape& t, std::uint32_t self) {
    const Tensor& g = t.node_grad(self);
    for (std::uint32_t in : t.inputs(self)) {
      Tensor& acc = t.accumulator(in);
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
  });
}

Var squared_norm(Var a) { return dot(a, a); }

}  // namespace cgat::diff
