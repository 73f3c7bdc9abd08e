#pragma once

#include <optional>

#include "emorec/corpus.hpp"
#include "emorec/losses.hpp"
#include "emorec/metrics.hpp"
#include "emorec/views.hpp"

namespace emorec {

enum class TrainMode {
  single_view,        // L_a only
  joint_multiview,    // L_c + beta_a L_a + beta_m L_m, both views updated
  frozen_teacher_ce,  // L_c + L_a against a frozen second view
  frozen_teacher_kl,  // L_c + L_KL against a frozen second view
};

const char* to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

enum class NegStrategy { random_diff_class, acoustically_similar };

const char* to_string(NegStrategy s);
NegStrategy neg_strategy_from_string(const std::string& s);

struct TrainPlan {
  TrainMode mode = TrainMode::single_view;
  int epochs = 30;
  std::size_t batch_size = 64;
  double lr = 1e-4;
  double clip_tau = 5.0;
  double l2 = 1e-5;
  LossWeights weights;
  NegStrategy neg_strategy = NegStrategy::acoustically_similar;
  std::uint64_t seed = 0;
};

// Label-indexed pools over a training split, the source of negative samples.
class CorpusIndex {
 public:
  CorpusIndex(const Corpus& corpus, const std::vector<std::size_t>& split);
  const std::vector<std::size_t>& pool(Emotion label) const;
  std::size_t total() const { return total_; }

 private:
  std::array<std::vector<std::size_t>, kNumClasses> pools_;
  std::size_t total_ = 0;
};

// One negative per batch item, drawn with replacement: a uniformly random
// utterance of a different class, or of the acoustically similar partner
// class under that strategy.
std::vector<std::size_t> get_neg_samples(const std::vector<Emotion>& batch_labels,
                                         const CorpusIndex& index,
                                         NegStrategy strategy, Rng& rng);

// Named-parameter helpers over a view (excludes batch-norm running state).
NamedTensors trainable_params(const ViewParams& params);
void zero_grads(const NamedTensors& params);

// Global-norm clipping: if ||g|| > tau every gradient is scaled by tau/||g||.
// Returns the applied factor (1.0 when within bounds).
double clip_gradients(const NamedTensors& params, double tau);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState init(const NamedTensors& params);
};

// Bias-corrected Adam with l2 added to the gradient before the moment update.
void adam_step(const NamedTensors& params, AdamState& state, double lr, double l2);

struct StepReport {
  double loss_contrastive = 0.0;
  double loss_a = 0.0;   // beta-weighted acoustic cross-entropy contribution
  double loss_m = 0.0;   // beta-weighted multimodal cross-entropy contribution
  double loss_kl = 0.0;
  double total = 0.0;
  double clip_factor = 1.0;
};

// One optimization step over a positive batch and its sampled negatives.
// view_m is the second view (teacher in frozen modes, co-trained in joint
// mode, unused in single-view mode).
StepReport multiview_train_step(const Batch& batch, const Batch& negatives,
                                ViewParams& view_a, ViewParams* view_m,
                                const TrainPlan& plan, int epoch,
                                AdamState& adam_a, AdamState* adam_m,
                                Rng& dropout_rng);

struct EpochLog {
  int epoch = 0;
  double loss_contrastive = 0.0;
  double loss_a = 0.0;
  double loss_m = 0.0;
  double loss_kl = 0.0;
  double total = 0.0;
  double clip_factor_mean = 1.0;
  double val_ua = 0.0;
};

struct TrainResult {
  ViewParams best_view_a;                 // best-validation parameters of view 1
  std::optional<ViewParams> best_view_m;  // joint mode only
  std::vector<EpochLog> log;
  double best_val_ua = 0.0;
  int best_epoch = -1;
};

// Algorithm-level loop: seeded shuffled batches, negative sampling, per-epoch
// validation UA on view 1, best-checkpoint retention over a fixed epoch
// budget. The corpus must already be standardized for this fold.
TrainResult train(const Corpus& corpus, const FoldSplit& fold, ViewParams view_a,
                  std::optional<ViewParams> view_m, const TrainPlan& plan);

// Evaluation-mode predictions over a split; argmax of the class probabilities.
EvalResult evaluate_view(ViewParams& params, const Corpus& corpus,
                         const std::vector<std::size_t>& split,
                         std::size_t batch_size = 64);

}  // namespace emorec
