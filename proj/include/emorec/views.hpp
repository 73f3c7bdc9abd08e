#pragma once

#include <array>
#include <optional>

#include "emorec/attention.hpp"
#include "emorec/corpus.hpp"
#include "emorec/layers.hpp"

namespace emorec {

// The experimental model zoo. B-* are flat baselines, H-* build on acoustic
// word representations; the MM variants fuse acoustic and lexical channels.
enum class ViewKind {
  b_aco_1,       // raw frames -> BLSTM stack -> mean pool
  b_aco_2,       // speaker frames only
  b_lex,         // word vectors -> BLSTM stack -> mean pool
  b_mm_1,        // pooled acoustic + pooled lexical, concatenated
  b_mm_2,        // same with speaker frames
  h_aco_1,       // acoustic words -> mean pool
  h_mm_1,        // concat(acoustic word, word vector) -> BLSTM -> mean pool
  h_mm_2,        // GMU fusion instead of concatenation
  h_mm_3,        // concatenation + context attention
  h_mm_4,        // GMU + context attention
  b_aco_1_attn,  // B-ACO-1 with context attention replacing the pool
};

const char* to_string(ViewKind k);
ViewKind view_kind_from_string(const std::string& s);

enum class WordReadout { span_edges, span_mean };

struct ViewConfig {
  ViewKind kind = ViewKind::b_aco_1;
  std::size_t hidden_dim = 256;
  std::size_t num_layers = 2;
  std::size_t frame_feat_dim = 0;
  std::size_t word_vec_dim = 0;  // required only for lexical-bearing kinds
  std::size_t num_classes = kNumClasses;
  double dropout_p = 0.5;
  // How an acoustic word reads the frame BLSTM outputs over its span:
  // forward state at the span end joined with backward state at the span
  // start, or the mean over the span.
  WordReadout readout = WordReadout::span_edges;

  bool uses_gmu() const;
  bool uses_attention() const;
  bool needs_lexical() const;
  bool needs_alignment() const;
  bool needs_speaker_flags() const;
  std::size_t embedding_dim() const;
  void validate() const;

  std::string to_kv_text() const;
  static ViewConfig from_kv_text(const std::string& text);
};

enum class RunMode { train, eval };

struct ViewOutput {
  Tensor h;      // utterance embedding (attention or pooling output)
  Tensor y_hat;  // class probabilities, rows sum to 1
  Tensor attn;   // [batch, words] context-attention weights, when present
  Tensor gate;   // [batch, words] per-word mean of the GMU gate, when present
  std::vector<int> word_counts;  // valid words per item (attention/gate views)
};

// All parameters of one view. Forward passes in training mode update the
// batch-norm running statistics, hence the non-const receiver.
struct ViewParams {
  ViewConfig cfg;
  BiLstm frame_lstm;  // acoustic stack (all acoustic-bearing kinds)
  BiLstm word_lstm;   // lexical or fused word-level stack
  GmuParams gmu;
  BatchNorm bn_acoustic;  // modality batch norm in front of the GMU
  BatchNorm bn_lexical;
  AttnParams attn;
  Tensor cls_w, cls_b;

  static ViewParams init(const ViewConfig& cfg, std::uint64_t seed);
  NamedTensors named() const;
  void set_trainable(bool trainable);
  // Bytewise fingerprint of all parameter values (freeze verification).
  std::uint64_t fingerprint() const;
  // Independent copy; tensors otherwise share storage across ViewParams copies.
  ViewParams deep_copy() const;
};

// Keeps exactly the speaker-flagged frames of one utterance, in order, as a
// one-item sequence. No speaker frames at all is a data error.
SeqTensor speaker_frame_filter(const UtteranceRecord& u);

// Word-level sequence from frame-level BLSTM outputs: one vector per aligned
// word span. spans must be ordered, disjoint, non-empty and within bounds of
// the corresponding item's valid frames (filtered index space).
SeqTensor acoustic_word_encode(const SeqTensor& frames,
                               const std::vector<std::vector<std::array<int, 2>>>& spans,
                               const BiLstm& enc, WordReadout readout);

ViewOutput view_forward(ViewParams& params, const Batch& batch, RunMode mode,
                        Rng* dropout_rng = nullptr);

// Versioned binary checkpoint: magic, version, config as key-value text, then
// named tensors (name length, name, rank, extents, raw little-endian f64).
void save_checkpoint(const ViewParams& params, const std::string& path);
ViewParams load_checkpoint(const std::string& path);

}  // namespace emorec
