#pragma once

#include "emorec/layers.hpp"
#include "emorec/tensor.hpp"

namespace emorec {

// Gated multimodal unit over an acoustic and a lexical input vector:
//   h_a = tanh(W_a x_a + b_a)
//   h_l = tanh(W_l x_l + b_l)
//   z   = sigma(W_z [x_a, x_l] + b_z)
//   h   = z * h_a + (1 - z) * h_l
struct GmuParams {
  std::size_t acoustic_dim = 0;
  std::size_t lexical_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor w_a, b_a;
  Tensor w_l, b_l;
  Tensor w_z, b_z;  // over the concatenated inputs

  static GmuParams init(std::size_t acoustic_dim, std::size_t lexical_dim,
                        std::size_t hidden_dim, Rng& rng);
  void collect(const std::string& prefix, NamedTensors& out) const;
};

struct GmuOutput {
  Tensor h;  // fused vector [batch, hidden]
  Tensor z;  // gate, elementwise in (0, 1); kept for visualization
};

GmuOutput gmu_forward(const Tensor& x_a, const Tensor& x_l, const GmuParams& p);

// Additive context attention over per-step hidden vectors:
//   e_i = v^T tanh(W_h h_i + b_h),  a = masked softmax(e),  z = sum_i a_i h_i.
// b_h and v live in the attention space (extent attn_dim).
struct AttnParams {
  std::size_t hidden_dim = 0;
  std::size_t attn_dim = 0;
  Tensor w_h;  // [hidden, attn]
  Tensor b_h;  // [attn]
  Tensor v;    // [attn]

  static AttnParams init(std::size_t hidden_dim, std::size_t attn_dim, Rng& rng);
  void collect(const std::string& prefix, NamedTensors& out) const;
};

struct AttnOutput {
  Tensor pooled;   // [batch, hidden]
  Tensor weights;  // [batch, steps]; zero at masked steps, sums to 1 over valid
};

AttnOutput context_attention(const SeqTensor& seq, const AttnParams& p);

}  // namespace emorec
