#pragma once

// Straight-line scalar reference implementations used as independent oracles.
// These stay free of the Tensor graph machinery on purpose.

#include <cmath>
#include <vector>

namespace refimpl {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;  // [row][col]

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline Vec affine(const Vec& x, const Mat& w, const Vec& b) {
  Vec out(b);
  for (std::size_t j = 0; j < b.size(); ++j)
    for (std::size_t i = 0; i < x.size(); ++i) out[j] += x[i] * w[i][j];
  return out;
}

struct LstmGates {
  Mat w_i, w_f, w_o, w_g;  // [input+hidden][hidden]
  Vec b_i, b_f, b_o, b_g;
};

struct LstmStep {
  Vec h, c;
};

inline LstmStep lstm_step(const Vec& x, const Vec& h_prev, const Vec& c_prev,
                          const LstmGates& g) {
  Vec z = x;
  z.insert(z.end(), h_prev.begin(), h_prev.end());
  const std::size_t hid = g.b_i.size();
  Vec i = affine(z, g.w_i, g.b_i);
  Vec f = affine(z, g.w_f, g.b_f);
  Vec o = affine(z, g.w_o, g.b_o);
  Vec cand = affine(z, g.w_g, g.b_g);
  LstmStep out{Vec(hid), Vec(hid)};
  for (std::size_t k = 0; k < hid; ++k) {
    const double ik = sigmoid(i[k]);
    const double fk = sigmoid(f[k]);
    const double ok = sigmoid(o[k]);
    const double gk = std::tanh(cand[k]);
    out.c[k] = fk * c_prev[k] + ik * gk;
    out.h[k] = ok * std::tanh(out.c[k]);
  }
  return out;
}

}  // namespace refimpl
