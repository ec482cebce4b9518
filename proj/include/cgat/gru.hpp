#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "cgat/autodiff.hpp"

namespace cgat::diff {

// Parameter ids of one GRU layer with input and hidden width d.
struct GruParams {
  ParamId w_z, u_z, b_z;  // update gate
  ParamId w_r, u_r, b_r;  // reset gate
  ParamId w_h, u_h, b_h;  // candidate state

  // Registers the nine tensors as "<prefix>.w_z", ...; weights are filled by
  // the caller's initializer.
  static GruParams create(ParamRegistry& registry, const std::string& prefix, std::size_t d);
};

// Tape handles of the GRU weights.
struct GruWeights {
  Var w_z, u_z, b_z;
  Var w_r, u_r, b_r;
  Var w_h, u_h, b_h;

  static GruWeights bind(Tape& tape, const GruParams& params);
};

// z = sigmoid(x W_z + h U_z + b_z)
// r = sigmoid(x W_r + h U_r + b_r)
// c = tanh(x W_h + (r * h) U_h + b_h)
// h' = (1 - z) * h + z * c
Var gru_cell(const GruWeights& w, Var x, Var h_prev);

// Runs the cell over `sequence` from a zero state and returns the last
// hidden state; an empty sequence yields the zero vector.
Var gru_run(Tape& tape, const GruWeights& w, std::span<const Var> sequence, std::size_t width);

}  // namespace cgat::diff
