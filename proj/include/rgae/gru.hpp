#pragma once

#include <string>
#include <vector>

#include "rgae/mathcore.hpp"

namespace rgae {

/// GRU cell with a linear read-out.
///   z = sig(Wz x + Uz h + bz)
///   r = sig(Wr x + Ur h + br)
///   h' = z .* h + (1 - z) .* tanh(Wh x + Uh (r .* h) + bh)
///   out = Uo h'
struct GruParams {
  int input_size = 0;
  int hidden = 0;
  int output_size = 0;
  Matrix wz, wr, wh;  // H x D_in
  Matrix uz, ur, uh;  // H x H
  Vector bz, br, bh;  // H
  Matrix uo;          // D_out x H

  static GruParams zeros(int input_size, int hidden, int output_size);
  static GruParams random(int input_size, int hidden, int output_size, Rng& rng);

  void validate() const;
  std::vector<TensorView> tensors(const std::string& prefix = "gru/");
};

/// Single unbatched step.
Vector gru_step(const GruParams& params, const Vector& input, const Vector& h_prev);

/// Intermediates of one batched step (columns are batch elements).
struct GruStepCache {
  Matrix h_prev;
  Matrix z;
  Matrix r;
  Matrix c;  // candidate tanh(...)
};

/// Batched step given the input projections xz = Wz x, xr = Wr x, xh = Wh x.
Matrix gru_forward_step(const GruParams& params, const Matrix& xz, const Matrix& xr, const Matrix& xh,
                        const Matrix& h_prev, GruStepCache* cache);

/// Gradients w.r.t. the gate pre-activations of one step.
struct GruGateGrads {
  Matrix dz;
  Matrix dr;
  Matrix dh;
};

/// Back-propagates `d_out` (dL/dh' of this step). Accumulates the recurrent
/// weight and bias gradients into `grad`, writes dL/dh_prev into `d_prev`
/// and returns the pre-activation gradients; the caller turns those into
/// input-weight and input gradients.
GruGateGrads gru_backward_step(const GruParams& params, const GruStepCache& cache, const Matrix& d_out,
                               GruParams& grad, Matrix& d_prev);

}  // namespace rgae
