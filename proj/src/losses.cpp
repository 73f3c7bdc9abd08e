#include "emorec/losses.hpp"

#include <cmath>

namespace emorec {

namespace {
constexpr double kProbFloor = 1e-12;
}

Tensor cross_entropy(const Tensor& y_onehot, const Tensor& y_hat, double beta) {
  if (y_onehot.rank() != 2 || y_onehot.shape() != y_hat.shape())
    throw DimError("cross_entropy: label/prediction shapes differ");
  const std::size_t n = y_hat.extent(0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < y_hat.extent(1); ++c)
      if (y_onehot.at(i, c) != 0.0 && y_hat.at(i, c) < kProbFloor) {
        warn("cross_entropy: clamped zero probability at the true class (row " +
             std::to_string(i) + ")");
        break;
      }
  Tensor log_probs = log(clamp_min(y_hat, kProbFloor));
  Tensor picked = mul(y_onehot, log_probs);
  return mul_scalar(sum(picked), -beta / static_cast<double>(n));
}

Tensor cosine_distance(const Tensor& v, const Tensor& w) {
  if (v.rank() != 2 || v.shape() != w.shape())
    throw DimError("cosine_distance: shapes differ");
  for (std::size_t i = 0; i < v.extent(0); ++i) {
    double nv = 0.0, nw = 0.0;
    for (std::size_t j = 0; j < v.extent(1); ++j) {
      nv += v.at(i, j) * v.at(i, j);
      nw += w.at(i, j) * w.at(i, j);
    }
    if (nv == 0.0 || nw == 0.0)
      throw DomainError("cosine_distance: zero-norm vector at row " +
                        std::to_string(i));
  }
  Tensor dot = rowsum(mul(v, w));
  Tensor norm_v = sqrt(rowsum(mul(v, v)));
  Tensor norm_w = sqrt(rowsum(mul(w, w)));
  return add_scalar(neg(div(dot, mul(norm_v, norm_w))), 1.0);
}

Tensor contrastive_loss(const Tensor& h_a, const Tensor& h_m_pos, const Tensor& h_m_neg,
                        const Tensor& h_m, const Tensor& h_a_pos, const Tensor& h_a_neg,
                        double margin) {
  if (margin < 0.0)
    throw ContractError("contrastive_loss: negative margin " + std::to_string(margin));
  const double n = static_cast<double>(h_a.extent(0));
  Tensor slack_a =
      relu(add_scalar(sub(cosine_distance(h_a, h_m_pos), cosine_distance(h_a, h_m_neg)),
                      margin));
  Tensor slack_m =
      relu(add_scalar(sub(cosine_distance(h_m, h_a_pos), cosine_distance(h_m, h_a_neg)),
                      margin));
  return mul_scalar(add(sum(slack_a), sum(slack_m)), 1.0 / (2.0 * n));
}

Tensor kl_distill_loss(const Tensor& teacher_probs, const Tensor& student_probs) {
  if (teacher_probs.rank() != 2 || teacher_probs.shape() != student_probs.shape())
    throw DimError("kl_distill: teacher/student shapes differ");
  const std::size_t n = teacher_probs.extent(0);
  const std::size_t c = teacher_probs.extent(1);

  // Detach the teacher: only its values enter the loss.
  Tensor p_t = Tensor::from(teacher_probs.data(), teacher_probs.shape());

  // sum p_t log p_t is a constant; 0 log 0 contributes nothing.
  double entropy_term = 0.0;
  bool clamped = false;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double pt = p_t.at(i, j);
      if (pt > 0.0) {
        entropy_term += pt * std::log(pt);
        if (student_probs.at(i, j) < kProbFloor) clamped = true;
      }
    }
  if (clamped)
    warn("kl_distill: clamped zero student probability where the teacher has mass");

  Tensor cross = sum(mul(p_t, log(clamp_min(student_probs, kProbFloor))));
  return mul_scalar(add_scalar(neg(cross), entropy_term),
                    1.0 / static_cast<double>(n));
}

double beta_schedule(double beta_0, double rho, int epoch) {
  if (rho < 0.0 || epoch < 0)
    throw ContractError("beta_schedule: rho and epoch must be non-negative");
  return beta_0 / (1.0 + rho * static_cast<double>(epoch));
}

}  // namespace emorec
