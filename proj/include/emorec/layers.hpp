#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "emorec/tensor.hpp"

namespace emorec {

// Named parameter list in creation order; the order is the checkpoint order.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Batched variable-length sequence. steps[t] is [batch, feat]; mask is a 0/1
// tensor of shape [batch, steps] that never carries gradient.
struct SeqTensor {
  std::vector<Tensor> steps;
  Tensor mask;
  std::vector<int> lengths;

  std::size_t batch() const { return steps.empty() ? 0 : steps[0].extent(0); }
  std::size_t step_count() const { return steps.size(); }
  std::size_t feat() const { return steps.empty() ? 0 : steps[0].extent(1); }

  // mask column t as a [batch] tensor.
  Tensor mask_col(std::size_t t) const;
  // Validates mask/lengths consistency and lengths[i] >= 1.
  void validate() const;
};

// x [batch, in] * W [in, out] + b [out]
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

// Uniform init in [-k, k], k = 1/sqrt(fan_in).
Tensor init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor init_bias(std::size_t dim);

// One LSTM cell; gate weights use the concatenated [x_t, h_prev] convention,
// shape [input_dim + hidden_dim, hidden_dim] per gate.
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor w_i, b_i;  // input gate
  Tensor w_f, b_f;  // forget gate
  Tensor w_o, b_o;  // output gate
  Tensor w_g, b_g;  // candidate

  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  void collect(const std::string& prefix, NamedTensors& out) const;
};

struct LstmState {
  Tensor h;
  Tensor c;
};

// i,f,o = sigma(affine([x,h])), g = tanh(affine([x,h])),
// c' = f*c + i*g, h' = o*tanh(c').
LstmState lstm_cell_step(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev,
                         const LstmParams& p);

// Stacked bidirectional LSTM; layer k consumes layer k-1's [batch, 2*hidden]
// outputs. Masked steps produce exact zero vectors and no gradient.
struct BiLstm {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<LstmParams> fwd;  // one per layer
  std::vector<LstmParams> bwd;

  static BiLstm init(std::size_t input_dim, std::size_t hidden_dim,
                     std::size_t num_layers, Rng& rng);
  // Output steps are [batch, 2*hidden]: forward half then backward half.
  SeqTensor forward(const SeqTensor& in) const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

// Batch normalization over [batch, feat] with learned scale/shift and running
// statistics (biased variance, epsilon 1e-5, momentum 0.9). The masked form
// computes statistics over rows with row_mask 1 only; every row is still
// transformed (callers re-mask downstream).
struct BatchNorm {
  Tensor gamma, beta;
  Tensor running_mean, running_var;  // data-only state, saved with checkpoints
  double eps = 1e-5;
  double momentum = 0.9;

  static BatchNorm init(std::size_t feat);
  Tensor forward(const Tensor& x, bool training);
  Tensor forward_masked(const Tensor& x, const Tensor& row_mask, bool training);
  void collect(const std::string& prefix, NamedTensors& out) const;
};

// Inverted dropout: zeroes with probability p and scales survivors by
// 1/(1-p) so evaluation is the identity.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

// Per-item mean of unmasked step vectors -> [batch, feat].
Tensor mean_pool(const SeqTensor& seq);

}  // namespace emorec
