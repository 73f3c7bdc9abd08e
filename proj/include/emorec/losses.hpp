#pragma once

#include "emorec/tensor.hpp"

namespace emorec {

// Objective weights; beta(epoch) = beta_0 / (1 + rho * epoch) when rho > 0
// (the trainer applies the schedule to the multimodal weight).
struct LossWeights {
  double beta_a = 1.0;
  double beta_m = 0.3;
  double margin = 0.5;
  double rho = 0.0;
};

// -(beta / N) * sum_i sum_c y[i,c] * log(y_hat[i,c]); probabilities are
// clamped at 1e-12 with a numerics warning when the true class hits the clamp.
Tensor cross_entropy(const Tensor& y_onehot, const Tensor& y_hat, double beta);

// Row-wise 1 - cos(v, w) for [n, d] inputs -> [n], each value in [0, 2].
Tensor cosine_distance(const Tensor& v, const Tensor& w);

// Symmetric cross-view hinge (margin m):
//   (1/2N) sum_i max(0, m + dis(h_a_i, h_m_pos_i) - dis(h_a_i, h_m_neg_i))
// + (1/2N) sum_i max(0, m + dis(h_m_i, h_a_pos_i) - dis(h_m_i, h_a_neg_i))
Tensor contrastive_loss(const Tensor& h_a, const Tensor& h_m_pos, const Tensor& h_m_neg,
                        const Tensor& h_m, const Tensor& h_a_pos, const Tensor& h_a_neg,
                        double margin);

// (1/N) sum_i sum_c p_t log(p_t / p_s), teacher rows detached from the graph;
// gradient reaches the student only. Student probabilities are clamped at
// 1e-12 where the teacher has mass.
Tensor kl_distill_loss(const Tensor& teacher_probs, const Tensor& student_probs);

double beta_schedule(double beta_0, double rho, int epoch);

}  // namespace emorec
