#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "emorec/common.hpp"

namespace emorec {

enum class Emotion : int { anger = 0, happiness = 1, neutral = 2, sadness = 3 };
constexpr int kNumClasses = 4;

const char* to_string(Emotion e);
Emotion emotion_from_string(const std::string& s);
// Appendix-style pairing of acoustically confusable classes:
// anger <-> happiness, neutral <-> sadness.
Emotion acoustically_similar_partner(Emotion e);

// One utterance: frame features at 10 ms steps, per-frame speaker flags,
// word-level lexical features and word->frame alignment spans.
struct UtteranceRecord {
  std::string id;
  int session = 0;
  std::string speaker;
  Emotion label = Emotion::neutral;
  std::vector<std::vector<double>> frames;        // [T][frame_dim]
  std::vector<std::uint8_t> speaker_flags;        // [T], 0 = silence/other speaker
  std::vector<std::string> tokens;                // [W]
  std::vector<std::vector<double>> word_vecs;     // [W][word_dim]
  std::vector<std::array<int, 2>> alignment;      // [W], [start, end) frame spans
  int cue_word = -1;   // generator metadata: word carrying the lexical cue
  bool scripted = false;

  bool has_lexical() const { return !word_vecs.empty(); }
  std::size_t frame_count() const { return frames.size(); }
  std::size_t word_count() const { return word_vecs.size(); }
  void validate() const;  // throws DataError naming this record
};

struct Corpus {
  std::vector<UtteranceRecord> records;

  std::size_t size() const { return records.size(); }
  std::size_t frame_dim() const;
  std::size_t word_dim() const;  // 0 when lexical fields are absent
  void validate() const;
};

// Line-delimited records, one JSON object per line; floats round-trip
// bit-exactly. Loading enforces every record invariant.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// Removes tokens/word_vecs/alignment from every record (the deployment-time
// shape for acoustic-only evaluation).
void strip_lexical(Corpus& corpus);

// Per-feature frame statistics. Zero-variance features transform to zero.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // 0 marks a zero-variance feature
};

// Fits statistics on the frames of records[fit_indices] only, then transforms
// every record in place with those statistics.
FeatureStats z_standardize(Corpus& corpus, const std::vector<std::size_t>& fit_indices);
FeatureStats fit_frame_stats(const Corpus& corpus,
                             const std::vector<std::size_t>& fit_indices);
void apply_frame_stats(Corpus& corpus, const FeatureStats& stats);
void save_stats(const FeatureStats& stats, const std::string& path);
FeatureStats load_stats(const std::string& path);

// Speaker-exclusive folds: each session is held out once and its two speakers
// alternate validation/test roles, so S sessions give 2S folds.
struct FoldSplit {
  int fold_id = 0;
  int held_out_session = 0;
  std::string val_speaker;
  std::string test_speaker;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

std::vector<FoldSplit> make_folds(const Corpus& corpus);

// A batch holds truncated copies of its records (Appendix-A caps applied).
struct Batch {
  std::vector<UtteranceRecord> items;
};

constexpr int kMaxFrames = 700;
constexpr int kMaxWords = 30;

std::vector<Batch> make_batches(const Corpus& corpus,
                                const std::vector<std::size_t>& split,
                                std::size_t batch_size, Rng& rng, bool shuffle,
                                int max_frames = kMaxFrames,
                                int max_words = kMaxWords);

// Synthetic corpus generator. alpha steers which channel carries the label:
// 1 = acoustics alone recover it, 0 = word vectors alone, in between both
// channels are needed for the full four-way distinction (acoustics encode the
// anger/happiness vs neutral/sadness factor strongly plus the full class only
// weakly, and symmetrically for the lexical side).
struct SynthSpec {
  int sessions = 5;
  int speakers_per_session = 2;
  int utterances_per_speaker = 80;
  std::vector<double> class_proportions = {1103, 1632, 1703, 1082};
  int frame_feat_dim = 16;
  int word_vec_dim = 16;
  int min_words = 4;
  int max_words = 8;
  int min_frames_per_word = 4;
  int max_frames_per_word = 10;
  int min_silence = 0;
  int max_silence = 4;
  double alpha = 1.0;
  double frame_noise = 1.0;
  double word_noise = 0.3;
  double acoustic_scale = 2.5;
  double lexical_scale = 2.5;
  // Extra multipliers on the alpha-derived full-class strengths, for tuning
  // how hard the cross-channel signal is to extract at intermediate alphas.
  double acoustic_class_gain = 1.0;
  double lexical_class_gain = 1.0;
  // Concentrates the weak full-class acoustic signal on the cue word's span
  // instead of spreading it over every word span.
  bool class_signal_in_cue_span_only = false;
  // Mixes this fraction of a class direction into each distractor vocabulary
  // vector. The assignment is label-independent, so distractors stay
  // uninformative on average but make the lexical channel unreliable per word.
  double distractor_class_leak = 0.0;
  int distractor_vocab = 50;

  void validate() const;
};

SynthSpec load_synth_spec(const std::string& path);
void save_synth_spec(const SynthSpec& spec, const std::string& path);

Corpus synth_generate(const SynthSpec& spec, std::uint64_t seed);

}  // namespace emorec
