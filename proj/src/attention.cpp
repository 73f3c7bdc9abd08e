#include "emorec/attention.hpp"

namespace emorec {

GmuParams GmuParams::init(std::size_t acoustic_dim, std::size_t lexical_dim,
                          std::size_t hidden_dim, Rng& rng) {
  GmuParams p;
  p.acoustic_dim = acoustic_dim;
  p.lexical_dim = lexical_dim;
  p.hidden_dim = hidden_dim;
  p.w_a = init_weight(acoustic_dim, hidden_dim, rng);
  p.b_a = init_bias(hidden_dim);
  p.w_l = init_weight(lexical_dim, hidden_dim, rng);
  p.b_l = init_bias(hidden_dim);
  p.w_z = init_weight(acoustic_dim + lexical_dim, hidden_dim, rng);
  p.b_z = init_bias(hidden_dim);
  return p;
}

void GmuParams::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".w_a", w_a);
  out.emplace_back(prefix + ".b_a", b_a);
  out.emplace_back(prefix + ".w_l", w_l);
  out.emplace_back(prefix + ".b_l", b_l);
  out.emplace_back(prefix + ".w_z", w_z);
  out.emplace_back(prefix + ".b_z", b_z);
}

GmuOutput gmu_forward(const Tensor& x_a, const Tensor& x_l, const GmuParams& p) {
  if (x_a.rank() != 2 || x_a.extent(1) != p.acoustic_dim)
    throw DimError("gmu: acoustic input extent " +
                   std::to_string(x_a.rank() == 2 ? x_a.extent(1) : 0) +
                   " != configured " + std::to_string(p.acoustic_dim));
  if (x_l.rank() != 2 || x_l.extent(1) != p.lexical_dim)
    throw DimError("gmu: lexical input extent " +
                   std::to_string(x_l.rank() == 2 ? x_l.extent(1) : 0) +
                   " != configured " + std::to_string(p.lexical_dim));
  if (x_a.extent(0) != x_l.extent(0))
    throw DimError("gmu: batch extents differ: " + std::to_string(x_a.extent(0)) +
                   " vs " + std::to_string(x_l.extent(0)));

  Tensor h_a = emorec::tanh(affine(x_a, p.w_a, p.b_a));
  Tensor h_l = emorec::tanh(affine(x_l, p.w_l, p.b_l));
  Tensor z = sigmoid(affine(concat_cols(x_a, x_l), p.w_z, p.b_z));
  Tensor one_minus_z = add_scalar(neg(z), 1.0);
  Tensor h = add(mul(z, h_a), mul(one_minus_z, h_l));
  return {h, z};
}

AttnParams AttnParams::init(std::size_t hidden_dim, std::size_t attn_dim, Rng& rng) {
  AttnParams p;
  p.hidden_dim = hidden_dim;
  p.attn_dim = attn_dim;
  p.w_h = init_weight(hidden_dim, attn_dim, rng);
  p.b_h = init_bias(attn_dim);
  const double k = 1.0 / std::sqrt(static_cast<double>(attn_dim));
  std::vector<double> vv(attn_dim);
  for (auto& x : vv) x = rng.uniform(-k, k);
  p.v = Tensor::from(std::move(vv), {attn_dim}, true);
  return p;
}

void AttnParams::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".w_h", w_h);
  out.emplace_back(prefix + ".b_h", b_h);
  out.emplace_back(prefix + ".v", v);
}

AttnOutput context_attention(const SeqTensor& seq, const AttnParams& p) {
  if (seq.feat() != p.hidden_dim)
    throw DimError("attention: step extent " + std::to_string(seq.feat()) +
                   " != configured hidden " + std::to_string(p.hidden_dim));
  // v as a column so each step yields one score per item
  Tensor v_col = reshape(p.v, {p.attn_dim, 1});

  Tensor scores;
  for (std::size_t t = 0; t < seq.step_count(); ++t) {
    Tensor e_t = matmul(emorec::tanh(affine(seq.steps[t], p.w_h, p.b_h)), v_col);
    scores = t == 0 ? e_t : concat_cols(scores, e_t);
  }
  Tensor a = softmax_masked(scores, seq.mask);
  Tensor pooled = attend_steps(seq.steps, a);
  return {pooled, a};
}

}  // namespace emorec
