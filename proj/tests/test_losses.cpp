#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "emorec/losses.hpp"

using namespace emorec;

namespace {

// Rotates [1, 0] by theta so dis([1,0], rot(theta)) = 1 - cos(theta).
Tensor unit_at(double theta) {
  return Tensor::from({std::cos(theta), std::sin(theta)}, {1, 2});
}

}  // namespace

TEST_CASE("cross entropy basics") {
  Tensor y = Tensor::from({0, 1, 0, 0}, {1, 4});
  Tensor exact = Tensor::from({0, 1, 0, 0}, {1, 4});
  CHECK(cross_entropy(y, exact, 1.0).value() == doctest::Approx(0.0));

  Tensor uniform = Tensor::full({1, 4}, 0.25);
  CHECK(cross_entropy(y, uniform, 1.0).value() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // exactly linear in beta
  Tensor y2 = Tensor::from({1, 0, 0, 0, 0, 0, 1, 0}, {2, 4});
  Tensor p2 = Tensor::from({0.4, 0.3, 0.2, 0.1, 0.15, 0.25, 0.35, 0.25}, {2, 4});
  const double base = cross_entropy(y2, p2, 1.0).value();
  CHECK(cross_entropy(y2, p2, 0.3).value() == doctest::Approx(0.3 * base).epsilon(1e-15));

  // zero probability at the true class clamps instead of failing
  Tensor hard = Tensor::from({0.0, 1.0, 0.0, 0.0}, {1, 4});
  Tensor zeroed = Tensor::from({1.0, 0.0, 0.0, 0.0}, {1, 4});
  CHECK(cross_entropy(hard, zeroed, 1.0).value() ==
        doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
}

TEST_CASE("cosine distance") {
  Tensor v = Tensor::from({0.3, -0.7, 0.2}, {1, 3});
  CHECK(cosine_distance(v, v).at(0) == doctest::Approx(0.0).epsilon(1e-12));
  Tensor nv = Tensor::from({-0.3, 0.7, -0.2}, {1, 3});
  CHECK(cosine_distance(v, nv).at(0) == doctest::Approx(2.0).epsilon(1e-12));
  Tensor e1 = Tensor::from({1.0, 0.0}, {1, 2});
  Tensor e2 = Tensor::from({0.0, 1.0}, {1, 2});
  CHECK(cosine_distance(e1, e2).at(0) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(cosine_distance(e1, Tensor::zeros({1, 2})), DomainError);
}

TEST_CASE("contrastive hinge cases") {
  const double m = 0.5;
  Tensor anchor = unit_at(0.0);

  // positives at distance 0, negatives at distance >= m on both sides
  {
    Tensor pos = unit_at(0.0);
    Tensor neg = unit_at(M_PI / 2);  // distance 1 >= m
    CHECK(contrastive_loss(anchor, pos, neg, anchor, pos, neg, m).value() ==
          doctest::Approx(0.0));
  }

  // pos dist 0.4, neg dist 0.4: each hinge is m, averaged over both terms
  {
    const double theta = std::acos(1.0 - 0.4);
    Tensor pos = unit_at(theta);
    Tensor neg = unit_at(theta);
    CHECK(contrastive_loss(anchor, pos, neg, anchor, pos, neg, m).value() ==
          doctest::Approx(0.5).epsilon(1e-12));
  }

  // identical positive and negative partners: both hinges sit at max(0, m) = m
  {
    Tensor same = unit_at(0.3);
    CHECK(contrastive_loss(anchor, same, same, anchor, same, same, m).value() ==
          doctest::Approx(m).epsilon(1e-12));
  }

  CHECK_THROWS_AS(
      contrastive_loss(anchor, anchor, anchor, anchor, anchor, anchor, -0.1),
      ContractError);
}

TEST_CASE("contrastive hinge monotonicity") {
  const double m = 0.5;
  Tensor anchor = unit_at(0.0);
  Tensor neg = unit_at(1.1);
  double prev = HUGE_VAL;
  // moving the positive partner closer never increases the loss
  for (double theta = 1.4; theta >= 0.0; theta -= 0.2) {
    Tensor pos = unit_at(theta);
    const double cur =
        contrastive_loss(anchor, pos, neg, anchor, pos, neg, m).value();
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
  // moving the negative partner farther never increases the loss
  Tensor pos = unit_at(0.4);
  prev = HUGE_VAL;
  for (double theta = 0.1; theta <= 3.1; theta += 0.3) {
    Tensor negs = unit_at(theta);
    const double cur =
        contrastive_loss(anchor, pos, negs, anchor, pos, negs, m).value();
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("kl distillation") {
  Tensor p = Tensor::from({0.2, 0.5, 0.1, 0.2}, {1, 4});
  CHECK(kl_distill_loss(p, p).value() == doctest::Approx(0.0).epsilon(1e-12));

  Tensor pt = Tensor::from({1.0, 0.0}, {1, 2});
  Tensor ps = Tensor::from({0.5, 0.5}, {1, 2});
  CHECK(kl_distill_loss(pt, ps).value() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // non-negative over random distribution pairs (Gibbs)
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(4), b(4);
    double sa = 0, sb = 0;
    for (int j = 0; j < 4; ++j) {
      a[j] = rng.uniform(1e-6, 1.0);
      b[j] = rng.uniform(1e-6, 1.0);
      sa += a[j];
      sb += b[j];
    }
    for (int j = 0; j < 4; ++j) {
      a[j] /= sa;
      b[j] /= sb;
    }
    CHECK(kl_distill_loss(Tensor::from(a, {1, 4}), Tensor::from(b, {1, 4})).value() >=
          -1e-12);
  }
}

TEST_CASE("kl gradient reaches the student only") {
  Tensor teacher = Tensor::from({0.7, 0.3}, {1, 2}, true);
  Tensor logits = Tensor::from({0.2, -0.4}, {1, 2}, true);
  Tensor student = softmax_masked(logits, Tensor::full({1, 2}, 1.0));
  backward(kl_distill_loss(teacher, student));
  CHECK(teacher.grad().empty());
  REQUIRE(!logits.grad().empty());
  CHECK(std::abs(logits.grad()[0]) > 0.0);
}

TEST_CASE("losses pass grad_check through small networks") {
  Rng rng(37);
  Tensor w = Tensor::from({0.4, -0.2, 0.3, 0.8, -0.5, 0.1}, {3, 2}, true);

  auto ce = [&](Tensor& wt) {
    Tensor x = Tensor::from({0.3, -0.9, 0.5, 0.2, 0.7, -0.4}, {2, 3});
    Tensor probs = softmax_masked(matmul(x, wt), Tensor::full({2, 2}, 1.0));
    Tensor y = Tensor::from({1, 0, 0, 1}, {2, 2});
    return cross_entropy(y, probs, 0.7);
  };
  CHECK(grad_check(ce, w, 1e-5) < 1e-4);

  auto contrastive = [&](Tensor& wt) {
    Tensor x = Tensor::from({0.3, -0.9, 0.5, 0.2, 0.7, -0.4}, {2, 3});
    Tensor h = emorec::tanh(matmul(x, wt));
    Tensor pos = Tensor::from({0.5, 0.1, -0.3, 0.8}, {2, 2});
    Tensor negs = Tensor::from({-0.6, 0.2, 0.4, -0.9}, {2, 2});
    return contrastive_loss(h, pos, negs, h, pos, negs, 0.5);
  };
  CHECK(grad_check(contrastive, w, 1e-5) < 1e-4);

  auto kl = [&](Tensor& wt) {
    Tensor x = Tensor::from({0.3, -0.9, 0.5, 0.2, 0.7, -0.4}, {2, 3});
    Tensor probs = softmax_masked(matmul(x, wt), Tensor::full({2, 2}, 1.0));
    Tensor teacher = Tensor::from({0.9, 0.1, 0.25, 0.75}, {2, 2});
    return kl_distill_loss(teacher, probs);
  };
  CHECK(grad_check(kl, w, 1e-5) < 1e-4);
  (void)rng;
}

TEST_CASE("beta schedule") {
  CHECK(beta_schedule(0.3, 0.0, 17) == doctest::Approx(0.3));
  CHECK(beta_schedule(1.0, 1.0, 1) == doctest::Approx(0.5));
  double prev = HUGE_VAL;
  for (int epoch = 0; epoch < 10; ++epoch) {
    const double b = beta_schedule(1.0, 0.4, epoch);
    CHECK(b <= prev);
    prev = b;
  }
  CHECK_THROWS_AS(beta_schedule(1.0, -0.1, 0), ContractError);
}
