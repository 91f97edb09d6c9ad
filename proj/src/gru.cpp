#include "rgae/gru.hpp"

#include <stdexcept>

namespace rgae {

GruParams GruParams::zeros(int input_size, int hidden, int output_size) {
  GruParams p;
  p.input_size = input_size;
  p.hidden = hidden;
  p.output_size = output_size;
  p.wz = p.wr = p.wh = Matrix::Zero(hidden, input_size);
  p.uz = p.ur = p.uh = Matrix::Zero(hidden, hidden);
  p.bz = p.br = p.bh = Vector::Zero(hidden);
  p.uo = Matrix::Zero(output_size, hidden);
  p.validate();
  return p;
}

GruParams GruParams::random(int input_size, int hidden, int output_size, Rng& rng) {
  GruParams p = zeros(input_size, hidden, output_size);
  for (Matrix* w : {&p.wz, &p.wr, &p.wh}) *w = glorot_uniform(hidden, input_size, rng);
  for (Matrix* u : {&p.uz, &p.ur, &p.uh}) *u = glorot_uniform(hidden, hidden, rng);
  p.uo = glorot_uniform(output_size, hidden, rng);
  auto t = p.tensors();
  quantize_f32(t);
  return p;
}

void GruParams::validate() const {
  if (input_size < 0 || hidden < 0 || output_size < 0) throw std::invalid_argument("GRU sizes must be non-negative");
  auto check = [](const Matrix& m, int rows, int cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols)
      throw std::invalid_argument(std::string("GRU matrix ") + name + " has inconsistent shape");
  };
  check(wz, hidden, input_size, "Wz");
  check(wr, hidden, input_size, "Wr");
  check(wh, hidden, input_size, "Wh");
  check(uz, hidden, hidden, "Uz");
  check(ur, hidden, hidden, "Ur");
  check(uh, hidden, hidden, "Uh");
  check(uo, output_size, hidden, "Uo");
  if (bz.size() != hidden || br.size() != hidden || bh.size() != hidden)
    throw std::invalid_argument("GRU bias has inconsistent size");
}

std::vector<TensorView> GruParams::tensors(const std::string& prefix) {
  return {view(prefix + "Wz", wz), view(prefix + "Wr", wr), view(prefix + "Wh", wh),
          view(prefix + "Uz", uz), view(prefix + "Ur", ur), view(prefix + "Uh", uh),
          view(prefix + "bz", bz), view(prefix + "br", br), view(prefix + "bh", bh),
          view(prefix + "Uo", uo)};
}

Vector gru_step(const GruParams& p, const Vector& input, const Vector& h_prev) {
  if (input.size() != p.input_size) throw std::invalid_argument("gru_step: input size mismatch");
  if (h_prev.size() != p.hidden) throw std::invalid_argument("gru_step: hidden size mismatch");
  const Vector z = sigmoid(Vector(p.wz * input + p.uz * h_prev + p.bz));
  const Vector r = sigmoid(Vector(p.wr * input + p.ur * h_prev + p.br));
  const Vector c = tanh(Vector(p.wh * input + p.uh * r.cwiseProduct(h_prev) + p.bh));
  return z.cwiseProduct(h_prev) + (Vector::Ones(p.hidden) - z).cwiseProduct(c);
}

Matrix gru_forward_step(const GruParams& p, const Matrix& xz, const Matrix& xr, const Matrix& xh,
                        const Matrix& h_prev, GruStepCache* cache) {
  Matrix az = xz + p.uz * h_prev;
  az.colwise() += p.bz;
  Matrix ar = xr + p.ur * h_prev;
  ar.colwise() += p.br;
  Matrix z = sigmoid(az);
  Matrix r = sigmoid(ar);
  Matrix ah = xh + p.uh * r.cwiseProduct(h_prev);
  ah.colwise() += p.bh;
  Matrix c = ah.array().tanh().matrix();
  Matrix h = z.cwiseProduct(h_prev) + (1.0 - z.array()).matrix().cwiseProduct(c);
  if (cache) {
    cache->h_prev = h_prev;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->c = std::move(c);
  }
  return h;
}

GruGateGrads gru_backward_step(const GruParams& p, const GruStepCache& s, const Matrix& d_out, GruParams& grad,
                               Matrix& d_prev) {
  const auto& z = s.z;
  const auto& r = s.r;
  const auto& c = s.c;
  const auto& h = s.h_prev;

  GruGateGrads g;
  const Matrix d_c = d_out.cwiseProduct((1.0 - z.array()).matrix());
  g.dh = d_c.cwiseProduct((1.0 - c.array().square()).matrix());
  const Matrix d_z = d_out.cwiseProduct(h - c);
  g.dz = d_z.cwiseProduct((z.array() * (1.0 - z.array())).matrix());

  const Matrix rh = r.cwiseProduct(h);
  const Matrix d_rh = p.uh.transpose() * g.dh;
  g.dr = d_rh.cwiseProduct(h).cwiseProduct((r.array() * (1.0 - r.array())).matrix());

  d_prev = d_out.cwiseProduct(z) + d_rh.cwiseProduct(r);
  d_prev.noalias() += p.uz.transpose() * g.dz;
  d_prev.noalias() += p.ur.transpose() * g.dr;

  grad.uz.noalias() += g.dz * h.transpose();
  grad.ur.noalias() += g.dr * h.transpose();
  grad.uh.noalias() += g.dh * rh.transpose();
  grad.bz += g.dz.rowwise().sum();
  grad.br += g.dr.rowwise().sum();
  grad.bh += g.dh.rowwise().sum();
  return g;
}

}  // namespace rgae
