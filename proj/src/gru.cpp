#include "cgat/gru.hpp"

namespace cgat::diff {

GruParams GruParams::create(ParamRegistry& registry, const std::string& prefix, std::size_t d) {
  auto mat = [&](const char* name) { return registry.add(prefix + "." + name, Tensor(d, d)); };
  auto vec = [&](const char* name) { return registry.add(prefix + "." + name, Tensor(1, d)); };
  GruParams p;
  p.w_z = mat("w_z");
  p.u_z = mat("u_z");
  p.b_z = vec("b_z");
  p.w_r = mat("w_r");
  p.u_r = mat("u_r");
  p.b_r = vec("b_r");
  p.w_h = mat("w_h");
  p.u_h = mat("u_h");
  p.b_h = vec("b_h");
  return p;
}

GruWeights GruWeights::bind(Tape& tape, const GruParams& p) {
  return {tape.param(p.w_z), tape.param(p.u_z), tape.param(p.b_z),
          tape.param(p.w_r), tape.param(p.u_r), tape.param(p.b_r),
          tape.param(p.w_h), tape.param(p.u_h), tape.param(p.b_h)};
}

Var gru_cell(const GruWeights& w, Var x, Var h_prev) {
  Var z = sigmoid(add(affine(x, w.w_z, w.b_z), matmul(h_prev, w.u_z)));
  Var r = sigmoid(add(affine(x, w.w_r, w.b_r), matmul(h_prev, w.u_r)));
  Var candidate = tanh(add(affine(x, w.w_h, w.b_h), matmul(mul(r, h_prev), w.u_h)));
  return gate(z, candidate, h_prev);
}

Var gru_run(Tape& tape, const GruWeights& w, std::span<const Var> sequence, std::size_t width) {
  Var h = tape.constant(Tensor(1, width));
  for (Var x : sequence) h = gru_cell(w, x, h);
  return h;
}

}  // namespace cgat::diff
