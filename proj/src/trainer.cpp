#include "emorec/trainer.hpp"

#include <cmath>

namespace emorec {

const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::single_view: return "single-view";
    case TrainMode::joint_multiview: return "joint-multiview";
    case TrainMode::frozen_teacher_ce: return "frozen-teacher-ce";
    case TrainMode::frozen_teacher_kl: return "frozen-teacher-kl";
  }
  throw ContractError("unknown train mode");
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "single-view") return TrainMode::single_view;
  if (s == "joint-multiview") return TrainMode::joint_multiview;
  if (s == "frozen-teacher-ce") return TrainMode::frozen_teacher_ce;
  if (s == "frozen-teacher-kl") return TrainMode::frozen_teacher_kl;
  throw ConfigError("unknown train mode '" + s + "'");
}

const char* to_string(NegStrategy s) {
  return s == NegStrategy::random_diff_class ? "random-diff-class"
                                             : "acoustically-similar";
}

NegStrategy neg_strategy_from_string(const std::string& s) {
  if (s == "random-diff-class") return NegStrategy::random_diff_class;
  if (s == "acoustically-similar") return NegStrategy::acoustically_similar;
  throw ConfigError("unknown negative sampling strategy '" + s + "'");
}

// ---- negative sampling --------------------------------------------------------

CorpusIndex::CorpusIndex(const Corpus& corpus, const std::vector<std::size_t>& split) {
  for (std::size_t idx : split) {
    pools_[static_cast<int>(corpus.records.at(idx).label)].push_back(idx);
    ++total_;
  }
}

const std::vector<std::size_t>& CorpusIndex::pool(Emotion label) const {
  return pools_[static_cast<int>(label)];
}

std::vector<std::size_t> get_neg_samples(const std::vector<Emotion>& batch_labels,
                                         const CorpusIndex& index,
                                         NegStrategy strategy, Rng& rng) {
  std::vector<std::size_t> negatives;
  negatives.reserve(batch_labels.size());
  for (Emotion y : batch_labels) {
    if (strategy == NegStrategy::acoustically_similar) {
      const Emotion partner = acoustically_similar_partner(y);
      const auto& pool = index.pool(partner);
      if (pool.empty())
        throw DataError(std::string("negative sampling: no candidates of class '") +
                        to_string(partner) + "'");
      negatives.push_back(pool[rng.uniform_int(pool.size())]);
    } else {
      std::size_t eligible = 0;
      for (int c = 0; c < kNumClasses; ++c)
        if (c != static_cast<int>(y)) eligible += index.pool(static_cast<Emotion>(c)).size();
      if (eligible == 0)
        throw DataError(std::string("negative sampling: no candidates outside class '") +
                        to_string(y) + "'");
      std::size_t pick = rng.uniform_int(eligible);
      for (int c = 0; c < kNumClasses; ++c) {
        if (c == static_cast<int>(y)) continue;
        const auto& pool = index.pool(static_cast<Emotion>(c));
        if (pick < pool.size()) {
          negatives.push_back(pool[pick]);
          break;
        }
        pick -= pool.size();
      }
    }
  }
  return negatives;
}

// ---- optimizer ------------------------------------------------------------------

NamedTensors trainable_params(const ViewParams& params) {
  NamedTensors out;
  for (auto& [name, tensor] : params.named())
    if (name.find("running_") == std::string::npos) out.emplace_back(name, tensor);
  return out;
}

void zero_grads(const NamedTensors& params) {
  for (const auto& [name, tensor] : params) tensor.zero_grad();
}

double clip_gradients(const NamedTensors& params, double tau) {
  if (tau <= 0.0) throw ContractError("clip_gradients: tau must be positive");
  double sq = 0.0;
  for (const auto& [name, tensor] : params) {
    if (tensor.grad().empty()) continue;
    for (double g : tensor.grad()) {
      if (!std::isfinite(g))
        throw NumericError("clip_gradients: non-finite gradient in '" + name + "'");
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  if (norm <= tau) return 1.0;
  const double factor = tau / norm;
  for (const auto& [name, tensor] : params)
    for (double& g : tensor.grad()) g *= factor;
  return factor;
}

AdamState AdamState::init(const NamedTensors& params) {
  AdamState state;
  for (const auto& [name, tensor] : params) {
    state.m.emplace_back(tensor.numel(), 0.0);
    state.v.emplace_back(tensor.numel(), 0.0);
  }
  return state;
}

void adam_step(const NamedTensors& params, AdamState& state, double lr, double l2) {
  if (state.m.size() != params.size())
    throw ContractError("adam_step: state built for a different parameter list");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& tensor = params[p].second;
    auto& theta = tensor.data();
    auto& m = state.m[p];
    auto& v = state.v[p];
    const bool has_grad = !tensor.grad().empty();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = (has_grad ? tensor.grad()[i] : 0.0) + l2 * theta[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

// ---- one step of Algorithm 1 -------------------------------------------------------

namespace {

Tensor onehot_labels(const Batch& batch) {
  const std::size_t n = batch.items.size();
  std::vector<double> vals(n * kNumClasses, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    vals[i * kNumClasses + static_cast<int>(batch.items[i].label)] = 1.0;
  return Tensor::from(std::move(vals), {n, kNumClasses});
}

void check_mode_setup(const TrainPlan& plan, const ViewParams& view_a,
                      const ViewParams* view_m) {
  const bool needs_second = plan.mode != TrainMode::single_view;
  if (needs_second && view_m == nullptr)
    throw ConfigError(std::string("mode ") + to_string(plan.mode) +
                      " needs a second view");
  if (needs_second && view_a.cfg.embedding_dim() != view_m->cfg.embedding_dim())
    throw ConfigError("contrastive views need equal embedding dims: " +
                      std::to_string(view_a.cfg.embedding_dim()) + " vs " +
                      std::to_string(view_m->cfg.embedding_dim()));
  const bool frozen = plan.mode == TrainMode::frozen_teacher_ce ||
                      plan.mode == TrainMode::frozen_teacher_kl;
  if (frozen) {
    for (const auto& [name, tensor] : trainable_params(*view_m))
      if (tensor.requires_grad())
        throw ConfigError("teacher view must be frozen in mode " +
                          std::string(to_string(plan.mode)));
  }
}

}  // namespace

StepReport multiview_train_step(const Batch& batch, const Batch& negatives,
                                ViewParams& view_a, ViewParams* view_m,
                                const TrainPlan& plan, int epoch,
                                AdamState& adam_a, AdamState* adam_m,
                                Rng& dropout_rng) {
  check_mode_setup(plan, view_a, view_m);
  const bool joint = plan.mode == TrainMode::joint_multiview;
  const bool frozen = plan.mode == TrainMode::frozen_teacher_ce ||
                      plan.mode == TrainMode::frozen_teacher_kl;
  if ((joint || frozen) && negatives.items.size() != batch.items.size())
    throw ContractError("multiview step: negatives do not pair with the batch");

  NamedTensors params_a = trainable_params(view_a);
  zero_grads(params_a);
  NamedTensors params_m;
  if (joint) {
    params_m = trainable_params(*view_m);
    zero_grads(params_m);
  }

  Tensor y = onehot_labels(batch);
  StepReport report;
  Tensor total;

  if (plan.mode == TrainMode::single_view) {
    ViewOutput out_a = view_forward(view_a, batch, RunMode::train, &dropout_rng);
    Tensor l_a = cross_entropy(y, out_a.y_hat, plan.weights.beta_a);
    report.loss_a = l_a.value();
    total = l_a;
  } else {
    const RunMode teacher_mode = frozen ? RunMode::eval : RunMode::train;
    // Algorithm order: negative hidden vectors first, then the positive
    // forwards with predictions.
    ViewOutput neg_a = view_forward(view_a, negatives, RunMode::train, &dropout_rng);
    ViewOutput neg_m = view_forward(*view_m, negatives, teacher_mode, &dropout_rng);
    ViewOutput out_a = view_forward(view_a, batch, RunMode::train, &dropout_rng);
    ViewOutput out_m = view_forward(*view_m, batch, teacher_mode, &dropout_rng);

    Tensor l_c = contrastive_loss(out_a.h, out_m.h, neg_m.h, out_m.h, out_a.h,
                                  neg_a.h, plan.weights.margin);
    report.loss_contrastive = l_c.value();
    total = l_c;

    if (plan.mode == TrainMode::frozen_teacher_kl) {
      Tensor l_kl = kl_distill_loss(out_m.y_hat, out_a.y_hat);
      report.loss_kl = l_kl.value();
      total = add(total, l_kl);
    } else {
      Tensor l_a = cross_entropy(y, out_a.y_hat, plan.weights.beta_a);
      report.loss_a = l_a.value();
      total = add(total, l_a);
      if (joint) {
        const double beta_m = plan.weights.rho > 0.0
                                  ? beta_schedule(plan.weights.beta_m,
                                                  plan.weights.rho, epoch)
                                  : plan.weights.beta_m;
        Tensor l_m = cross_entropy(y, out_m.y_hat, beta_m);
        report.loss_m = l_m.value();
        total = add(total, l_m);
      }
    }
  }

  report.total = total.value();
  if (!std::isfinite(report.total))
    throw NumericError("train step: non-finite loss");
  backward(total);

  NamedTensors all_trainable = params_a;
  all_trainable.insert(all_trainable.end(), params_m.begin(), params_m.end());
  report.clip_factor = clip_gradients(all_trainable, plan.clip_tau);
  adam_step(params_a, adam_a, plan.lr, plan.l2);
  if (joint) {
    if (adam_m == nullptr)
      throw ConfigError("joint mode needs an optimizer state for the second view");
    adam_step(params_m, *adam_m, plan.lr, plan.l2);
  }
  return report;
}

// ---- training loop -------------------------------------------------------------------

EvalResult evaluate_view(ViewParams& params, const Corpus& corpus,
                         const std::vector<std::size_t>& split,
                         std::size_t batch_size) {
  Rng unused(0);
  std::vector<Emotion> labels, preds;
  for (const Batch& batch :
       make_batches(corpus, split, batch_size, unused, false)) {
    ViewOutput out = view_forward(params, batch, RunMode::eval);
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
      labels.push_back(batch.items[i].label);
      int best = 0;
      for (int c = 1; c < kNumClasses; ++c)
        if (out.y_hat.at(i, c) > out.y_hat.at(i, best)) best = c;
      preds.push_back(static_cast<Emotion>(best));
    }
  }
  return unweighted_accuracy(labels, preds);
}

TrainResult train(const Corpus& corpus, const FoldSplit& fold, ViewParams view_a,
                  std::optional<ViewParams> view_m, const TrainPlan& plan) {
  ViewParams* second = view_m ? &*view_m : nullptr;
  check_mode_setup(plan, view_a, second);
  if (fold.train.empty() || fold.val.empty())
    throw ContractError("train: fold has an empty split");

  const bool needs_negatives = plan.mode != TrainMode::single_view;
  CorpusIndex index(corpus, fold.train);

  Rng shuffle_rng(plan.seed);
  Rng neg_rng(plan.seed ^ 0x9e3779b97f4a7c15ull);
  Rng dropout_rng(plan.seed ^ 0xc2b2ae3d27d4eb4full);

  AdamState adam_a = AdamState::init(trainable_params(view_a));
  std::optional<AdamState> adam_m;
  if (plan.mode == TrainMode::joint_multiview)
    adam_m = AdamState::init(trainable_params(*view_m));

  TrainResult result;
  result.best_view_a = view_a.deep_copy();
  if (plan.mode == TrainMode::joint_multiview)
    result.best_view_m = view_m->deep_copy();
  result.best_val_ua = 0.0;

  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    std::size_t steps = 0;
    for (Batch& batch :
         make_batches(corpus, fold.train, plan.batch_size, shuffle_rng, true)) {
      if (batch.items.size() < 2) {
        warn("train: skipping a single-item remainder batch (batch-norm floor)");
        continue;
      }
      Batch negatives;
      if (needs_negatives) {
        std::vector<Emotion> labels;
        for (const auto& item : batch.items) labels.push_back(item.label);
        std::vector<std::size_t> picks =
            get_neg_samples(labels, index, plan.neg_strategy, neg_rng);
        Rng no_shuffle(0);
        negatives = make_batches(corpus, picks, picks.size(), no_shuffle, false)[0];
      }
      StepReport step;
      try {
        step = multiview_train_step(batch, negatives, view_a, second, plan, epoch,
                                    adam_a, adam_m ? &*adam_m : nullptr,
                                    dropout_rng);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " step " +
                           std::to_string(steps) + ": " + e.what());
      }
      log.loss_contrastive += step.loss_contrastive;
      log.loss_a += step.loss_a;
      log.loss_m += step.loss_m;
      log.loss_kl += step.loss_kl;
      log.total += step.total;
      log.clip_factor_mean += step.clip_factor;
      ++steps;
    }
    if (steps > 0) {
      log.loss_contrastive /= steps;
      log.loss_a /= steps;
      log.loss_m /= steps;
      log.loss_kl /= steps;
      log.total /= steps;
      log.clip_factor_mean /= steps;
    }
    log.val_ua = evaluate_view(view_a, corpus, fold.val, plan.batch_size).ua;
    result.log.push_back(log);
    if (log.val_ua > result.best_val_ua || result.best_epoch < 0) {
      result.best_val_ua = log.val_ua;
      result.best_epoch = epoch;
      result.best_view_a = view_a.deep_copy();
      if (plan.mode == TrainMode::joint_multiview)
        result.best_view_m = view_m->deep_copy();
    }
  }
  return result;
}

}  // namespace emorec
