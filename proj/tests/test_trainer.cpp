#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "emorec/trainer.hpp"

using namespace emorec;

namespace {

SynthSpec tiny_spec(double alpha, int per_speaker = 8) {
  SynthSpec spec;
  spec.utterances_per_speaker = per_speaker;
  spec.frame_feat_dim = 4;
  spec.word_vec_dim = 12;
  spec.min_words = 2;
  spec.max_words = 4;
  spec.min_frames_per_word = 2;
  spec.max_frames_per_word = 4;
  spec.min_silence = 0;
  spec.max_silence = 1;
  spec.alpha = alpha;
  return spec;
}

ViewConfig tiny_view(ViewKind kind, const Corpus& corpus, std::size_t hidden = 2) {
  ViewConfig cfg;
  cfg.kind = kind;
  cfg.hidden_dim = hidden;
  cfg.num_layers = 1;
  cfg.frame_feat_dim = corpus.frame_dim();
  cfg.word_vec_dim = corpus.word_dim();
  cfg.dropout_p = 0.0;
  return cfg;
}

Batch first_n(const Corpus& corpus, std::size_t n) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
  Rng rng(0);
  return make_batches(corpus, idx, n, rng, false)[0];
}

}  // namespace

TEST_CASE("mode and strategy names") {
  for (auto m : {TrainMode::single_view, TrainMode::joint_multiview,
                 TrainMode::frozen_teacher_ce, TrainMode::frozen_teacher_kl})
    CHECK(train_mode_from_string(to_string(m)) == m);
  for (auto s : {NegStrategy::random_diff_class, NegStrategy::acoustically_similar})
    CHECK(neg_strategy_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(train_mode_from_string("offline"), ConfigError);
}

TEST_CASE("negative sampling") {
  Corpus corpus = synth_generate(tiny_spec(0.5, 12), 3);
  std::vector<std::size_t> split(corpus.size());
  for (std::size_t i = 0; i < split.size(); ++i) split[i] = i;
  CorpusIndex index(corpus, split);

  std::vector<Emotion> labels = {Emotion::anger, Emotion::neutral, Emotion::happiness,
                                 Emotion::sadness, Emotion::anger};

  Rng rng(7);
  auto similar = get_neg_samples(labels, index, NegStrategy::acoustically_similar, rng);
  REQUIRE(similar.size() == labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    CHECK(corpus.records[similar[i]].label == acoustically_similar_partner(labels[i]));

  Rng rng2(7);
  auto diff = get_neg_samples(labels, index, NegStrategy::random_diff_class, rng2);
  for (std::size_t i = 0; i < labels.size(); ++i)
    CHECK(corpus.records[diff[i]].label != labels[i]);

  // seeded determinism
  Rng ra(11), rb(11);
  CHECK(get_neg_samples(labels, index, NegStrategy::random_diff_class, ra) ==
        get_neg_samples(labels, index, NegStrategy::random_diff_class, rb));

  // empty pool is a sampling error naming the class
  CorpusIndex empty_index(corpus, {});
  Rng rc(1);
  try {
    get_neg_samples({Emotion::anger}, empty_index, NegStrategy::acoustically_similar, rc);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("happiness") != std::string::npos);
  }
}

TEST_CASE("gradient clipping") {
  Tensor p1 = Tensor::from({0.0, 0.0}, {2}, true);
  Tensor p2 = Tensor::from({0.0}, {1}, true);
  NamedTensors params = {{"p1", p1}, {"p2", p2}};

  p1.grad() = {1.0, 2.0};
  p2.grad() = {2.0};  // norm 3
  CHECK(clip_gradients(params, 5.0) == 1.0);
  CHECK(p1.grad()[0] == 1.0);

  p1.grad() = {6.0, 8.0};
  p2.grad() = {0.0};  // norm 10
  CHECK(clip_gradients(params, 5.0) == doctest::Approx(0.5).epsilon(1e-12));
  double norm = std::sqrt(p1.grad()[0] * p1.grad()[0] + p1.grad()[1] * p1.grad()[1] +
                          p2.grad()[0] * p2.grad()[0]);
  CHECK(std::abs(norm - 5.0) < 1e-9);

  // boundary: norm exactly tau stays untouched
  p1.grad() = {3.0, 4.0};
  p2.grad() = {0.0};
  CHECK(clip_gradients(params, 5.0) == 1.0);
  CHECK(p1.grad()[0] == 3.0);

  p1.grad() = {std::nan(""), 0.0};
  try {
    clip_gradients(params, 5.0);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("p1") != std::string::npos);
  }
}

TEST_CASE("adam: l2 pull and hand-computed first step") {
  Tensor p = Tensor::from({1.0}, {1}, true);
  NamedTensors params = {{"p", p}};
  AdamState state = AdamState::init(params);
  p.zero_grad();
  adam_step(params, state, 0.1, 1e-2);
  CHECK(p.data()[0] < 1.0);  // only the l2 pull moves it
  CHECK(p.data()[0] > 0.8);

  Tensor q = Tensor::from({1.0}, {1}, true);
  NamedTensors qp = {{"q", q}};
  AdamState qs = AdamState::init(qp);
  q.grad() = {0.5};
  adam_step(qp, qs, 0.1, 0.0);
  // m_hat = g, v_hat = g**2, so the step is -lr * g / (|g| + eps)
  const double expect = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
  CHECK(q.data()[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("single-view training is deterministic and learns a separable corpus") {
  SynthSpec spec = tiny_spec(0.0, 16);  // lexical channel carries the label
  Corpus corpus = synth_generate(spec, 17);
  auto folds = make_folds(corpus);
  Corpus standardized = corpus;
  z_standardize(standardized, folds[0].train);

  ViewConfig cfg = tiny_view(ViewKind::b_lex, corpus, 8);
  TrainPlan plan;
  plan.mode = TrainMode::single_view;
  plan.epochs = 30;
  plan.batch_size = 16;
  plan.lr = 1e-2;
  plan.seed = 4;

  TrainResult run1 = train(standardized, folds[0], ViewParams::init(cfg, 1),
                           std::nullopt, plan);
  CHECK(run1.best_val_ua >= 0.95);

  TrainResult run2 = train(standardized, folds[0], ViewParams::init(cfg, 1),
                           std::nullopt, plan);
  REQUIRE(run1.log.size() == run2.log.size());
  for (std::size_t e = 0; e < run1.log.size(); ++e) {
    CHECK(run1.log[e].total == run2.log[e].total);
    CHECK(run1.log[e].val_ua == run2.log[e].val_ua);
  }
  CHECK(run1.best_view_a.fingerprint() == run2.best_view_a.fingerprint());

  // epochs = 0 returns the initialized parameters and an empty log
  TrainPlan none = plan;
  none.epochs = 0;
  ViewParams fresh = ViewParams::init(cfg, 1);
  const std::uint64_t before = fresh.fingerprint();
  TrainResult empty = train(standardized, folds[0], std::move(fresh), std::nullopt, none);
  CHECK(empty.log.empty());
  CHECK(empty.best_view_a.fingerprint() == before);
}

TEST_CASE("one multiview step matches a straight-line loss recomputation") {
  Corpus corpus = synth_generate(tiny_spec(0.5, 8), 23);
  auto folds = make_folds(corpus);
  Corpus standardized = corpus;
  z_standardize(standardized, folds[0].train);

  Batch batch = first_n(standardized, 4);
  ViewParams view_a = ViewParams::init(tiny_view(ViewKind::b_aco_1, corpus), 31);
  ViewParams view_m = ViewParams::init(tiny_view(ViewKind::h_mm_4, corpus), 37);
  ViewParams oracle_a = view_a.deep_copy();
  ViewParams oracle_m = view_m.deep_copy();

  TrainPlan plan;
  plan.mode = TrainMode::joint_multiview;
  plan.weights.beta_a = 1.0;
  plan.weights.beta_m = 0.3;
  plan.weights.margin = 0.5;

  std::vector<Emotion> labels;
  for (const auto& item : batch.items) labels.push_back(item.label);
  std::vector<std::size_t> all(standardized.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  CorpusIndex index(standardized, all);
  Rng neg_rng(5);
  auto picks = get_neg_samples(labels, index, plan.neg_strategy, neg_rng);
  Rng no_shuffle(0);
  Batch negatives = make_batches(standardized, picks, picks.size(), no_shuffle, false)[0];

  AdamState adam_a = AdamState::init(trainable_params(view_a));
  AdamState adam_m = AdamState::init(trainable_params(view_m));
  Rng dropout_rng(1);
  StepReport report = multiview_train_step(batch, negatives, view_a, &view_m, plan, 0,
                                           adam_a, &adam_m, dropout_rng);

  // independent composition over untouched parameter copies
  Rng oracle_drop(1);
  ViewOutput neg_a = view_forward(oracle_a, negatives, RunMode::train, &oracle_drop);
  ViewOutput neg_m = view_forward(oracle_m, negatives, RunMode::train, &oracle_drop);
  ViewOutput pos_a = view_forward(oracle_a, batch, RunMode::train, &oracle_drop);
  ViewOutput pos_m = view_forward(oracle_m, batch, RunMode::train, &oracle_drop);
  std::vector<double> y(4 * kNumClasses, 0.0);
  for (std::size_t i = 0; i < 4; ++i)
    y[i * kNumClasses + static_cast<int>(batch.items[i].label)] = 1.0;
  Tensor onehot = Tensor::from(y, {4, kNumClasses});
  const double expected =
      contrastive_loss(pos_a.h, pos_m.h, neg_m.h, pos_m.h, pos_a.h, neg_a.h, 0.5)
          .value() +
      cross_entropy(onehot, pos_a.y_hat, 1.0).value() +
      cross_entropy(onehot, pos_m.y_hat, 0.3).value();
  CHECK(std::abs(report.total - expected) < 1e-10);

  // loss composition is linear in the betas
  ViewParams la = oracle_a.deep_copy(), lm = oracle_m.deep_copy();
  AdamState s1 = AdamState::init(trainable_params(la));
  AdamState s2 = AdamState::init(trainable_params(lm));
  Rng d2(1);
  TrainPlan doubled = plan;
  doubled.weights.beta_a = 2.0;
  StepReport r2 = multiview_train_step(batch, negatives, la, &lm, doubled, 0, s1, &s2, d2);
  CHECK(r2.loss_a == doctest::Approx(2.0 * report.loss_a).epsilon(1e-12));

  ViewParams za = oracle_a.deep_copy(), zm = oracle_m.deep_copy();
  AdamState s3 = AdamState::init(trainable_params(za));
  AdamState s4 = AdamState::init(trainable_params(zm));
  Rng d3(1);
  TrainPlan zero_m = plan;
  zero_m.weights.beta_m = 0.0;
  StepReport r3 = multiview_train_step(batch, negatives, za, &zm, zero_m, 0, s3, &s4, d3);
  CHECK(r3.loss_m == 0.0);
  CHECK(r3.loss_contrastive > 0.0);
}

TEST_CASE("frozen teacher stays bitwise frozen") {
  Corpus corpus = synth_generate(tiny_spec(0.5, 8), 41);
  auto folds = make_folds(corpus);
  Corpus standardized = corpus;
  z_standardize(standardized, folds[0].train);

  Batch batch = first_n(standardized, 4);
  ViewParams student = ViewParams::init(tiny_view(ViewKind::b_aco_1, corpus), 43);
  ViewParams teacher = ViewParams::init(tiny_view(ViewKind::h_mm_4, corpus), 47);
  teacher.set_trainable(false);
  const std::uint64_t frozen_print = teacher.fingerprint();

  TrainPlan plan;
  plan.mode = TrainMode::frozen_teacher_kl;
  plan.lr = 1e-2;

  std::vector<std::size_t> all(standardized.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  CorpusIndex index(standardized, all);
  AdamState adam_a = AdamState::init(trainable_params(student));
  Rng neg_rng(3), dropout_rng(9);
  std::vector<Emotion> labels;
  for (const auto& item : batch.items) labels.push_back(item.label);

  const std::uint64_t student_before = student.fingerprint();
  for (int step = 0; step < 100; ++step) {
    auto picks = get_neg_samples(labels, index, plan.neg_strategy, neg_rng);
    Rng no_shuffle(0);
    Batch negatives =
        make_batches(standardized, picks, picks.size(), no_shuffle, false)[0];
    multiview_train_step(batch, negatives, student, &teacher, plan, 0, adam_a,
                         nullptr, dropout_rng);
  }
  CHECK(teacher.fingerprint() == frozen_print);
  CHECK(student.fingerprint() != student_before);

  // a trainable second view is rejected in frozen modes
  ViewParams thawed = ViewParams::init(tiny_view(ViewKind::h_mm_4, corpus), 47);
  Rng d(0);
  AdamState sa = AdamState::init(trainable_params(student));
  CHECK_THROWS_AS(multiview_train_step(batch, batch, student, &thawed, plan, 0, sa,
                                       nullptr, d),
                  ConfigError);
}
