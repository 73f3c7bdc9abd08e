#include "emorec/layers.hpp"

#include <cmath>

namespace emorec {

Tensor SeqTensor::mask_col(std::size_t t) const {
  const std::size_t b = batch();
  const std::size_t n = step_count();
  std::vector<double> col(b);
  for (std::size_t i = 0; i < b; ++i) col[i] = mask.at(i, t);
  (void)n;
  return Tensor::from(std::move(col), {b});
}

void SeqTensor::validate() const {
  const std::size_t b = batch();
  const std::size_t n = step_count();
  if (lengths.size() != b)
    throw ContractError("seq: lengths size " + std::to_string(lengths.size()) +
                        " != batch " + std::to_string(b));
  if (mask.rank() != 2 || mask.extent(0) != b || mask.extent(1) != n)
    throw ContractError("seq: mask shape inconsistent with steps");
  for (std::size_t i = 0; i < b; ++i) {
    if (lengths[i] < 1)
      throw ContractError("seq: zero-length item " + std::to_string(i));
    if (static_cast<std::size_t>(lengths[i]) > n)
      throw ContractError("seq: length exceeds step count at item " +
                          std::to_string(i));
    for (std::size_t t = 0; t < n; ++t) {
      const bool expect = t < static_cast<std::size_t>(lengths[i]);
      if ((mask.at(i, t) != 0.0) != expect)
        throw ContractError("seq: mask[" + std::to_string(i) + "][" +
                            std::to_string(t) + "] inconsistent with length");
    }
  }
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add(matmul(x, w), b);
}

Tensor init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> vals(fan_in * fan_out);
  for (auto& v : vals) v = rng.uniform(-k, k);
  return Tensor::from(std::move(vals), {fan_in, fan_out}, true);
}

Tensor init_bias(std::size_t dim) { return Tensor::zeros({dim}, true); }

LstmParams LstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const std::size_t in = input_dim + hidden_dim;
  p.w_i = init_weight(in, hidden_dim, rng);
  p.b_i = init_bias(hidden_dim);
  p.w_f = init_weight(in, hidden_dim, rng);
  p.b_f = init_bias(hidden_dim);
  p.w_o = init_weight(in, hidden_dim, rng);
  p.b_o = init_bias(hidden_dim);
  p.w_g = init_weight(in, hidden_dim, rng);
  p.b_g = init_bias(hidden_dim);
  return p;
}

void LstmParams::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".w_i", w_i);
  out.emplace_back(prefix + ".b_i", b_i);
  out.emplace_back(prefix + ".w_f", w_f);
  out.emplace_back(prefix + ".b_f", b_f);
  out.emplace_back(prefix + ".w_o", w_o);
  out.emplace_back(prefix + ".b_o", b_o);
  out.emplace_back(prefix + ".w_g", w_g);
  out.emplace_back(prefix + ".b_g", b_g);
}

LstmState lstm_cell_step(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev,
                         const LstmParams& p) {
  if (x_t.rank() != 2 || x_t.extent(1) != p.input_dim)
    throw DimError("lstm_cell: input feature extent " +
                   std::to_string(x_t.rank() == 2 ? x_t.extent(1) : 0) +
                   " != configured " + std::to_string(p.input_dim));
  Tensor z = concat_cols(x_t, h_prev);
  Tensor i = sigmoid(affine(z, p.w_i, p.b_i));
  Tensor f = sigmoid(affine(z, p.w_f, p.b_f));
  Tensor o = sigmoid(affine(z, p.w_o, p.b_o));
  Tensor g = emorec::tanh(affine(z, p.w_g, p.b_g));
  Tensor c = add(mul(f, c_prev), mul(i, g));
  Tensor h = mul(o, emorec::tanh(c));
  return {h, c};
}

BiLstm BiLstm::init(std::size_t input_dim, std::size_t hidden_dim,
                    std::size_t num_layers, Rng& rng) {
  BiLstm net;
  net.input_dim = input_dim;
  net.hidden_dim = hidden_dim;
  for (std::size_t layer = 0; layer < num_layers; ++layer) {
    const std::size_t in = layer == 0 ? input_dim : 2 * hidden_dim;
    net.fwd.push_back(LstmParams::init(in, hidden_dim, rng));
    net.bwd.push_back(LstmParams::init(in, hidden_dim, rng));
  }
  return net;
}

void BiLstm::collect(const std::string& prefix, NamedTensors& out) const {
  for (std::size_t layer = 0; layer < fwd.size(); ++layer) {
    fwd[layer].collect(prefix + ".l" + std::to_string(layer) + ".fwd", out);
    bwd[layer].collect(prefix + ".l" + std::to_string(layer) + ".bwd", out);
  }
}

namespace {

// Runs one direction over the sequence. The state is zeroed at masked steps,
// which both zeroes the emitted vector and blocks gradient flow there; with
// right-padded sequences this also gives the backward direction a zero state
// when it first enters the valid region.
std::vector<Tensor> lstm_direction(const SeqTensor& in, const LstmParams& p,
                                   bool reverse) {
  const std::size_t b = in.batch();
  const std::size_t n = in.step_count();
  std::vector<Tensor> out(n);
  Tensor h = Tensor::zeros({b, p.hidden_dim});
  Tensor c = Tensor::zeros({b, p.hidden_dim});
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    LstmState next = lstm_cell_step(in.steps[t], h, c, p);
    Tensor m = in.mask_col(t);
    h = scale_rows(next.h, m);
    c = scale_rows(next.c, m);
    out[t] = h;
  }
  return out;
}

}  // namespace

SeqTensor BiLstm::forward(const SeqTensor& in) const {
  SeqTensor cur = in;
  for (std::size_t layer = 0; layer < fwd.size(); ++layer) {
    std::vector<Tensor> f = lstm_direction(cur, fwd[layer], false);
    std::vector<Tensor> r = lstm_direction(cur, bwd[layer], true);
    SeqTensor next;
    next.mask = cur.mask;
    next.lengths = cur.lengths;
    next.steps.reserve(in.step_count());
    for (std::size_t t = 0; t < in.step_count(); ++t)
      next.steps.push_back(concat_cols(f[t], r[t]));
    cur = std::move(next);
  }
  return cur;
}

BatchNorm BatchNorm::init(std::size_t feat) {
  BatchNorm bn;
  bn.gamma = Tensor::full({feat}, 1.0, true);
  bn.beta = Tensor::zeros({feat}, true);
  bn.running_mean = Tensor::zeros({feat});
  bn.running_var = Tensor::full({feat}, 1.0);
  return bn;
}

void BatchNorm::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
  out.emplace_back(prefix + ".running_mean", running_mean);
  out.emplace_back(prefix + ".running_var", running_var);
}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
  return forward_masked(x, Tensor::full({x.extent(0)}, 1.0), training);
}

Tensor BatchNorm::forward_masked(const Tensor& x, const Tensor& row_mask,
                                 bool training) {
  if (x.rank() != 2 || x.extent(1) != gamma.extent(0))
    throw DimError("batch_norm: input shape mismatch");
  if (row_mask.rank() != 1 || row_mask.extent(0) != x.extent(0))
    throw DimError("batch_norm: row mask shape mismatch");

  if (!training) {
    Tensor denom = emorec::sqrt(add_scalar(running_var, eps));
    return add(mul(div(sub(x, running_mean), denom), gamma), beta);
  }

  double n_valid = 0.0;
  for (double v : row_mask.data()) n_valid += v != 0.0 ? 1.0 : 0.0;
  if (n_valid < 2.0)
    throw ContractError("batch_norm: training mode needs at least 2 rows, got " +
                        std::to_string(static_cast<long>(n_valid)));

  Tensor mu = mul_scalar(colsum(scale_rows(x, row_mask)), 1.0 / n_valid);
  Tensor centered = sub(x, mu);
  Tensor centered_valid = scale_rows(centered, row_mask);
  Tensor var =
      mul_scalar(colsum(mul(centered_valid, centered_valid)), 1.0 / n_valid);
  Tensor denom = emorec::sqrt(add_scalar(var, eps));
  Tensor out = add(mul(div(centered, denom), gamma), beta);

  for (std::size_t j = 0; j < gamma.extent(0); ++j) {
    running_mean.data()[j] =
        momentum * running_mean.data()[j] + (1.0 - momentum) * mu.data()[j];
    running_var.data()[j] =
        momentum * running_var.data()[j] + (1.0 - momentum) * var.data()[j];
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0)
    throw ContractError("dropout: p " + std::to_string(p) + " outside [0, 1)");
  if (!training || p == 0.0) return x;
  const double scale = 1.0 / (1.0 - p);
  std::vector<double> keep(x.numel());
  for (auto& v : keep) v = rng.uniform() >= p ? scale : 0.0;
  return mul(x, Tensor::from(std::move(keep), x.shape()));
}

Tensor mean_pool(const SeqTensor& seq) {
  const std::size_t b = seq.batch();
  const std::size_t n = seq.step_count();
  std::vector<double> w(b * n, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    if (seq.lengths[i] < 1)
      throw ContractError("mean_pool: item " + std::to_string(i) + " is fully masked");
    for (std::size_t t = 0; t < n; ++t)
      if (seq.mask.at(i, t) != 0.0) w[i * n + t] = 1.0 / seq.lengths[i];
  }
  return attend_steps(seq.steps, Tensor::from(std::move(w), {b, n}));
}

}  // namespace emorec
