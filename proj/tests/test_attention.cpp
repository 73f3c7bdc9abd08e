#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "emorec/attention.hpp"

using namespace emorec;

namespace {

GmuParams zero_gmu(std::size_t da, std::size_t dl, std::size_t dh) {
  GmuParams p;
  p.acoustic_dim = da;
  p.lexical_dim = dl;
  p.hidden_dim = dh;
  p.w_a = Tensor::zeros({da, dh}, true);
  p.b_a = Tensor::zeros({dh}, true);
  p.w_l = Tensor::zeros({dl, dh}, true);
  p.b_l = Tensor::zeros({dh}, true);
  p.w_z = Tensor::zeros({da + dl, dh}, true);
  p.b_z = Tensor::zeros({dh}, true);
  return p;
}

SeqTensor seq_from_steps(std::vector<Tensor> steps, std::vector<int> lengths) {
  SeqTensor seq;
  const std::size_t b = steps[0].extent(0);
  const std::size_t n = steps.size();
  std::vector<double> mask(b * n, 0.0);
  for (std::size_t i = 0; i < b; ++i)
    for (int t = 0; t < lengths[i]; ++t) mask[i * n + t] = 1.0;
  seq.steps = std::move(steps);
  seq.lengths = std::move(lengths);
  seq.mask = Tensor::from(std::move(mask), {b, n});
  return seq;
}

}  // namespace

TEST_CASE("gmu gate at zero parameters mixes evenly") {
  Rng rng(3);
  GmuParams p = zero_gmu(2, 3, 2);
  // give the branches non-trivial maps, keep the gate at zero
  p.w_a = init_weight(2, 2, rng);
  p.w_l = init_weight(3, 2, rng);
  Tensor x_a = Tensor::from({0.5, -1.0}, {1, 2});
  Tensor x_l = Tensor::from({0.2, 0.8, -0.6}, {1, 3});
  GmuOutput out = gmu_forward(x_a, x_l, p);
  Tensor h_a = emorec::tanh(affine(x_a, p.w_a, p.b_a));
  Tensor h_l = emorec::tanh(affine(x_l, p.w_l, p.b_l));
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(out.z.at(0, j) == 0.5);
    CHECK(out.h.at(0, j) ==
          doctest::Approx(0.5 * h_a.at(0, j) + 0.5 * h_l.at(0, j)).epsilon(1e-14));
  }
}

TEST_CASE("gmu with equal branches is gate-independent") {
  Rng rng(5);
  GmuParams p = zero_gmu(2, 2, 3);
  p.w_a = init_weight(2, 3, rng);
  p.w_l = Tensor::from(p.w_a.data(), {2, 3}, true);
  p.b_a = Tensor::from({0.1, -0.2, 0.3}, {3}, true);
  p.b_l = Tensor::from({0.1, -0.2, 0.3}, {3}, true);
  p.w_z = init_weight(4, 3, rng);  // arbitrary gate
  Tensor x = Tensor::from({0.4, -0.9}, {1, 2});
  GmuOutput out = gmu_forward(x, x, p);
  Tensor h_a = emorec::tanh(affine(x, p.w_a, p.b_a));
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(out.h.at(0, j) == doctest::Approx(h_a.at(0, j)).epsilon(1e-14));
}

TEST_CASE("gmu saturated gate passes the acoustic branch") {
  Rng rng(7);
  GmuParams p = zero_gmu(2, 2, 2);
  p.w_a = init_weight(2, 2, rng);
  p.w_l = init_weight(2, 2, rng);
  p.b_z = Tensor::full({2}, 20.0, true);
  Tensor x_a = Tensor::from({0.7, -0.3}, {1, 2});
  Tensor x_l = Tensor::from({-0.5, 0.9}, {1, 2});
  GmuOutput out = gmu_forward(x_a, x_l, p);
  Tensor h_a = emorec::tanh(affine(x_a, p.w_a, p.b_a));
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(out.z.at(0, j) > 0.9999);
    CHECK(std::abs(out.h.at(0, j) - h_a.at(0, j)) < 1e-3);
  }
}

TEST_CASE("gmu invariants: gate range and convexity") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    GmuParams p = GmuParams::init(3, 4, 3, rng);
    std::vector<double> av(2 * 3), lv(2 * 4);
    for (auto& v : av) v = rng.uniform(-2, 2);
    for (auto& v : lv) v = rng.uniform(-2, 2);
    Tensor x_a = Tensor::from(av, {2, 3});
    Tensor x_l = Tensor::from(lv, {2, 4});
    GmuOutput out = gmu_forward(x_a, x_l, p);
    Tensor h_a = emorec::tanh(affine(x_a, p.w_a, p.b_a));
    Tensor h_l = emorec::tanh(affine(x_l, p.w_l, p.b_l));
    for (std::size_t i = 0; i < out.z.numel(); ++i) {
      CHECK(out.z.data()[i] > 0.0);
      CHECK(out.z.data()[i] < 1.0);
      const double lo = std::min(h_a.data()[i], h_l.data()[i]);
      const double hi = std::max(h_a.data()[i], h_l.data()[i]);
      CHECK(out.h.data()[i] >= lo - 1e-12);
      CHECK(out.h.data()[i] <= hi + 1e-12);
    }
  }
}

TEST_CASE("gmu dimension errors") {
  GmuParams p = zero_gmu(2, 3, 2);
  CHECK_THROWS_AS(gmu_forward(Tensor::zeros({1, 3}), Tensor::zeros({1, 3}), p),
                  DimError);
  CHECK_THROWS_AS(gmu_forward(Tensor::zeros({1, 2}), Tensor::zeros({2, 3}), p),
                  DimError);
}

TEST_CASE("attention: singleton and uniform cases") {
  Rng rng(11);
  AttnParams p = AttnParams::init(3, 3, rng);
  Tensor h1 = Tensor::from({0.4, -0.2, 0.9}, {1, 3});
  SeqTensor single = seq_from_steps({h1}, {1});
  AttnOutput out = context_attention(single, p);
  CHECK(out.weights.at(0, 0) == 1.0);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(out.pooled.at(0, j) == doctest::Approx(h1.at(0, j)).epsilon(1e-14));

  // v = 0 makes every score equal: uniform weights, mean pooling
  AttnParams p0 = AttnParams::init(3, 3, rng);
  p0.v.data().assign(3, 0.0);
  Tensor s0 = Tensor::from({1.0, 2.0, 3.0}, {1, 3});
  Tensor s1 = Tensor::from({-1.0, 0.0, 5.0}, {1, 3});
  Tensor s2 = Tensor::from({3.0, 4.0, 1.0}, {1, 3});
  SeqTensor seq = seq_from_steps({s0, s1, s2}, {3});
  AttnOutput u = context_attention(seq, p0);
  for (std::size_t t = 0; t < 3; ++t)
    CHECK(u.weights.at(0, t) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(u.pooled.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(u.pooled.at(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(u.pooled.at(0, 2) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("attention matches scalar hand evaluation") {
  // 2-dim hidden, 2-dim attention space, 3 steps, one item
  AttnParams p;
  p.hidden_dim = 2;
  p.attn_dim = 2;
  p.w_h = Tensor::from({0.5, -0.3, 0.2, 0.7}, {2, 2}, true);
  p.b_h = Tensor::from({0.1, -0.2}, {2}, true);
  p.v = Tensor::from({0.9, -0.4}, {2}, true);
  const std::vector<std::vector<double>> h = {{0.3, -0.5}, {0.8, 0.1}, {-0.2, 0.6}};
  SeqTensor seq = seq_from_steps({Tensor::from(h[0], {1, 2}), Tensor::from(h[1], {1, 2}),
                                  Tensor::from(h[2], {1, 2})},
                                 {3});
  AttnOutput out = context_attention(seq, p);

  std::vector<double> e(3);
  for (std::size_t t = 0; t < 3; ++t) {
    const double u0 = std::tanh(h[t][0] * 0.5 + h[t][1] * 0.2 + 0.1);
    const double u1 = std::tanh(h[t][0] * -0.3 + h[t][1] * 0.7 - 0.2);
    e[t] = 0.9 * u0 - 0.4 * u1;
  }
  const double m = *std::max_element(e.begin(), e.end());
  double zsum = 0.0;
  for (double& v : e) {
    v = std::exp(v - m);
    zsum += v;
  }
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(out.weights.at(0, t) == doctest::Approx(e[t] / zsum).epsilon(1e-12));
  }
  for (std::size_t j = 0; j < 2; ++j) {
    double expect = 0.0;
    for (std::size_t t = 0; t < 3; ++t) expect += (e[t] / zsum) * h[t][j];
    CHECK(out.pooled.at(0, j) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("attention invariants: masking, normalization, permutation") {
  Rng rng(13);
  AttnParams p = AttnParams::init(2, 2, rng);
  Tensor s0 = Tensor::from({0.3, -0.5, 1.0, 0.2}, {2, 2});
  Tensor s1 = Tensor::from({0.8, 0.1, -0.7, 0.4}, {2, 2});
  Tensor s2 = Tensor::from({-0.2, 0.6, 0.0, 0.0}, {2, 2});
  SeqTensor seq = seq_from_steps({s0, s1, s2}, {3, 2});
  AttnOutput out = context_attention(seq, p);
  for (std::size_t i = 0; i < 2; ++i) {
    double total = 0.0;
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(out.weights.at(i, t) >= 0.0);
      total += out.weights.at(i, t);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(out.weights.at(1, 2) == 0.0);

  // per-coordinate convex hull for the fully valid item
  for (std::size_t j = 0; j < 2; ++j) {
    const double lo = std::min({s0.at(0, j), s1.at(0, j), s2.at(0, j)});
    const double hi = std::max({s0.at(0, j), s1.at(0, j), s2.at(0, j)});
    CHECK(out.pooled.at(0, j) >= lo - 1e-12);
    CHECK(out.pooled.at(0, j) <= hi + 1e-12);
  }

  // permuting valid steps permutes weights and keeps the pooled vector
  SeqTensor perm = seq_from_steps({s2, s0, s1}, {3, 3});
  SeqTensor base = seq_from_steps({s0, s1, s2}, {3, 3});
  AttnOutput a = context_attention(base, p);
  AttnOutput b = context_attention(perm, p);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(b.weights.at(i, 0) == doctest::Approx(a.weights.at(i, 2)).epsilon(1e-12));
    CHECK(b.weights.at(i, 1) == doctest::Approx(a.weights.at(i, 0)).epsilon(1e-12));
    CHECK(b.weights.at(i, 2) == doctest::Approx(a.weights.at(i, 1)).epsilon(1e-12));
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(b.pooled.at(i, j) == doctest::Approx(a.pooled.at(i, j)).epsilon(1e-12));
  }
}

TEST_CASE("gmu and attention pass grad_check composed to a scalar") {
  Rng rng(17);
  GmuParams gmu = GmuParams::init(2, 2, 2, rng);
  AttnParams attn = AttnParams::init(2, 2, rng);

  Tensor x = Tensor::from({0.5, -0.8, 0.3, 0.9, -0.1, 0.4, 0.7, -0.6}, {4, 2}, true);
  auto f = [&](Tensor& input) {
    Tensor x_a = slice_rows(input, 0, 2);
    Tensor x_l = slice_rows(input, 2, 2);
    GmuOutput g = gmu_forward(x_a, x_l, gmu);
    // fuse two "words" (the two batch rows) into a one-item sequence
    Tensor w0 = reshape(slice_rows(g.h, 0, 1), {1, 2});
    Tensor w1 = reshape(slice_rows(g.h, 1, 1), {1, 2});
    SeqTensor seq = seq_from_steps({w0, w1}, {2});
    AttnOutput out = context_attention(seq, attn);
    return sum(mul(out.pooled, out.pooled));
  };
  CHECK(grad_check(f, x, 1e-5) < 1e-4);

  // gradient reaches the parameters too
  for (auto& probe : {gmu.w_z, attn.v, attn.w_h}) {
    Tensor t = probe;
    auto fp = [&](Tensor&) {
      Tensor x_a = Tensor::from({0.5, -0.8, 0.3, 0.9}, {2, 2});
      Tensor x_l = Tensor::from({-0.1, 0.4, 0.7, -0.6}, {2, 2});
      GmuOutput g = gmu_forward(x_a, x_l, gmu);
      Tensor w0 = reshape(slice_rows(g.h, 0, 1), {1, 2});
      Tensor w1 = reshape(slice_rows(g.h, 1, 1), {1, 2});
      SeqTensor seq = seq_from_steps({w0, w1}, {2});
      AttnOutput out = context_attention(seq, attn);
      return sum(mul(out.pooled, out.pooled));
    };
    CHECK(grad_check(fp, t, 1e-5) < 1e-4);
  }
}
