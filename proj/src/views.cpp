#include "emorec/views.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace emorec {

const char* to_string(ViewKind k) {
  switch (k) {
    case ViewKind::b_aco_1: return "B-ACO-1";
    case ViewKind::b_aco_2: return "B-ACO-2";
    case ViewKind::b_lex: return "B-LEX";
    case ViewKind::b_mm_1: return "B-MM-1";
    case ViewKind::b_mm_2: return "B-MM-2";
    case ViewKind::h_aco_1: return "H-ACO-1";
    case ViewKind::h_mm_1: return "H-MM-1";
    case ViewKind::h_mm_2: return "H-MM-2";
    case ViewKind::h_mm_3: return "H-MM-3";
    case ViewKind::h_mm_4: return "H-MM-4";
    case ViewKind::b_aco_1_attn: return "B-ACO-1+Attention";
  }
  throw ContractError("unknown view kind");
}

ViewKind view_kind_from_string(const std::string& s) {
  static const std::map<std::string, ViewKind> table = {
      {"B-ACO-1", ViewKind::b_aco_1},
      {"B-ACO-2", ViewKind::b_aco_2},
      {"B-LEX", ViewKind::b_lex},
      {"B-MM-1", ViewKind::b_mm_1},
      {"B-MM-2", ViewKind::b_mm_2},
      {"H-ACO-1", ViewKind::h_aco_1},
      {"H-MM-1", ViewKind::h_mm_1},
      {"H-MM-2", ViewKind::h_mm_2},
      {"H-MM-3", ViewKind::h_mm_3},
      {"H-MM-4", ViewKind::h_mm_4},
      {"B-ACO-1+Attention", ViewKind::b_aco_1_attn},
  };
  auto it = table.find(s);
  if (it == table.end()) throw ConfigError("unknown view kind '" + s + "'");
  return it->second;
}

bool ViewConfig::uses_gmu() const {
  return kind == ViewKind::h_mm_2 || kind == ViewKind::h_mm_4;
}

bool ViewConfig::uses_attention() const {
  return kind == ViewKind::h_mm_3 || kind == ViewKind::h_mm_4 ||
         kind == ViewKind::b_aco_1_attn;
}

bool ViewConfig::needs_lexical() const {
  switch (kind) {
    case ViewKind::b_lex:
    case ViewKind::b_mm_1:
    case ViewKind::b_mm_2:
    case ViewKind::h_mm_1:
    case ViewKind::h_mm_2:
    case ViewKind::h_mm_3:
    case ViewKind::h_mm_4: return true;
    default: return false;
  }
}

bool ViewConfig::needs_alignment() const {
  switch (kind) {
    case ViewKind::h_aco_1:
    case ViewKind::h_mm_1:
    case ViewKind::h_mm_2:
    case ViewKind::h_mm_3:
    case ViewKind::h_mm_4: return true;
    default: return false;
  }
}

bool ViewConfig::needs_speaker_flags() const {
  return kind == ViewKind::b_aco_2 || kind == ViewKind::b_mm_2 || needs_alignment();
}

std::size_t ViewConfig::embedding_dim() const {
  if (kind == ViewKind::b_mm_1 || kind == ViewKind::b_mm_2) return 4 * hidden_dim;
  return 2 * hidden_dim;
}

void ViewConfig::validate() const {
  if (hidden_dim < 1 || num_layers < 1) throw ConfigError("view: bad stack shape");
  if (num_classes != kNumClasses)
    throw ConfigError("view: class count must be " + std::to_string(kNumClasses));
  if (kind != ViewKind::b_lex && frame_feat_dim < 1)
    throw ConfigError("view " + std::string(to_string(kind)) +
                      ": frame_feat_dim required");
  if (needs_lexical() && word_vec_dim < 1)
    throw ConfigError("view " + std::string(to_string(kind)) +
                      ": word_vec_dim required");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("view: bad dropout");
}

std::string ViewConfig::to_kv_text() const {
  std::ostringstream os;
  os << "kind=" << to_string(kind) << "\n";
  os << "hidden_dim=" << hidden_dim << "\n";
  os << "num_layers=" << num_layers << "\n";
  os << "frame_feat_dim=" << frame_feat_dim << "\n";
  os << "word_vec_dim=" << word_vec_dim << "\n";
  os << "num_classes=" << num_classes << "\n";
  os << "dropout_p=" << dropout_p << "\n";
  os << "readout=" << (readout == WordReadout::span_edges ? "span_edges" : "span_mean")
     << "\n";
  return os.str();
}

ViewConfig ViewConfig::from_kv_text(const std::string& text) {
  ViewConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "kind") cfg.kind = view_kind_from_string(value);
    else if (key == "hidden_dim") cfg.hidden_dim = std::stoul(value);
    else if (key == "num_layers") cfg.num_layers = std::stoul(value);
    else if (key == "frame_feat_dim") cfg.frame_feat_dim = std::stoul(value);
    else if (key == "word_vec_dim") cfg.word_vec_dim = std::stoul(value);
    else if (key == "num_classes") cfg.num_classes = std::stoul(value);
    else if (key == "dropout_p") cfg.dropout_p = std::stod(value);
    else if (key == "readout")
      cfg.readout = value == "span_mean" ? WordReadout::span_mean
                                         : WordReadout::span_edges;
    else throw ConfigError("checkpoint config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

// ---- parameters -------------------------------------------------------------

ViewParams ViewParams::init(const ViewConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ViewParams vp;
  vp.cfg = cfg;
  Rng rng(seed);
  const std::size_t h2 = 2 * cfg.hidden_dim;

  if (cfg.kind != ViewKind::b_lex)
    vp.frame_lstm =
        BiLstm::init(cfg.frame_feat_dim, cfg.hidden_dim, cfg.num_layers, rng);

  switch (cfg.kind) {
    case ViewKind::b_lex:
    case ViewKind::b_mm_1:
    case ViewKind::b_mm_2:
      vp.word_lstm = BiLstm::init(cfg.word_vec_dim, cfg.hidden_dim, cfg.num_layers, rng);
      break;
    case ViewKind::h_mm_1:
    case ViewKind::h_mm_3:
      vp.word_lstm =
          BiLstm::init(h2 + cfg.word_vec_dim, cfg.hidden_dim, cfg.num_layers, rng);
      break;
    case ViewKind::h_mm_2:
    case ViewKind::h_mm_4:
      vp.word_lstm = BiLstm::init(h2, cfg.hidden_dim, cfg.num_layers, rng);
      break;
    default: break;
  }

  if (cfg.uses_gmu()) {
    vp.gmu = GmuParams::init(h2, cfg.word_vec_dim, h2, rng);
    vp.bn_acoustic = BatchNorm::init(h2);
    vp.bn_lexical = BatchNorm::init(cfg.word_vec_dim);
  }
  if (cfg.uses_attention()) vp.attn = AttnParams::init(h2, h2, rng);

  vp.cls_w = init_weight(cfg.embedding_dim(), cfg.num_classes, rng);
  vp.cls_b = init_bias(cfg.num_classes);
  return vp;
}

NamedTensors ViewParams::named() const {
  NamedTensors out;
  if (!frame_lstm.fwd.empty()) frame_lstm.collect("frame_lstm", out);
  if (!word_lstm.fwd.empty()) word_lstm.collect("word_lstm", out);
  if (cfg.uses_gmu()) {
    gmu.collect("gmu", out);
    bn_acoustic.collect("bn_acoustic", out);
    bn_lexical.collect("bn_lexical", out);
  }
  if (cfg.uses_attention()) attn.collect("attn", out);
  out.emplace_back("cls.w", cls_w);
  out.emplace_back("cls.b", cls_b);
  return out;
}

void ViewParams::set_trainable(bool trainable) {
  for (auto& [name, tensor] : named()) {
    if (name.find("running_") != std::string::npos) continue;  // data-only state
    tensor.set_requires_grad(trainable);
  }
}

ViewParams ViewParams::deep_copy() const {
  ViewParams copy = ViewParams::init(cfg, 0);
  NamedTensors src = named();
  NamedTensors dst = copy.named();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i].second.data() = src[i].second.data();
    dst[i].second.set_requires_grad(src[i].second.requires_grad());
  }
  return copy;
}

std::uint64_t ViewParams::fingerprint() const {
  std::uint64_t hash = 1469598103934665603ull;  // FNV-1a
  auto mix = [&](const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= p[i];
      hash *= 1099511628211ull;
    }
  };
  for (const auto& [name, tensor] : named()) {
    mix(name.data(), name.size());
    mix(tensor.data().data(), tensor.data().size() * sizeof(double));
  }
  return hash;
}

// ---- input assembly -----------------------------------------------------------

namespace {

// Filtered-frame index spans for one record (rank of each original frame among
// the speaker-flagged ones). Spans stay contiguous because every in-span frame
// carries the speaker flag.
std::vector<std::array<int, 2>> remap_spans(const UtteranceRecord& r) {
  std::vector<int> rank(r.frames.size() + 1, 0);
  for (std::size_t t = 0; t < r.frames.size(); ++t)
    rank[t + 1] = rank[t] + (r.speaker_flags[t] ? 1 : 0);
  std::vector<std::array<int, 2>> spans;
  spans.reserve(r.alignment.size());
  for (const auto& [s, e] : r.alignment) spans.push_back({rank[s], rank[e]});
  return spans;
}

SeqTensor build_frames_seq(const Batch& batch, bool filtered,
                           std::size_t expect_dim) {
  const std::size_t b = batch.items.size();
  std::vector<std::vector<const std::vector<double>*>> rows(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& r = batch.items[i];
    if (r.frames.empty() || r.frames[0].size() != expect_dim)
      throw ConfigError("view: record '" + r.id + "' frame dimension " +
                        std::to_string(r.frames.empty() ? 0 : r.frames[0].size()) +
                        " != configured " + std::to_string(expect_dim));
    for (std::size_t t = 0; t < r.frames.size(); ++t)
      if (!filtered || r.speaker_flags[t]) rows[i].push_back(&r.frames[t]);
    if (rows[i].empty())
      throw DataError("record '" + r.id + "' has no speaker frames");
  }
  std::size_t max_len = 0;
  for (const auto& item : rows) max_len = std::max(max_len, item.size());

  SeqTensor seq;
  seq.lengths.resize(b);
  std::vector<double> mask(b * max_len, 0.0);
  for (std::size_t t = 0; t < max_len; ++t) {
    std::vector<double> vals(b * expect_dim, 0.0);
    for (std::size_t i = 0; i < b; ++i)
      if (t < rows[i].size())
        std::copy(rows[i][t]->begin(), rows[i][t]->end(),
                  vals.begin() + i * expect_dim);
    seq.steps.push_back(Tensor::from(std::move(vals), {b, expect_dim}));
  }
  for (std::size_t i = 0; i < b; ++i) {
    seq.lengths[i] = static_cast<int>(rows[i].size());
    for (std::size_t t = 0; t < rows[i].size(); ++t) mask[i * max_len + t] = 1.0;
  }
  seq.mask = Tensor::from(std::move(mask), {b, max_len});
  return seq;
}

SeqTensor build_words_seq(const Batch& batch, std::size_t expect_dim,
                          const char* kind_name) {
  const std::size_t b = batch.items.size();
  std::size_t max_words = 0;
  for (const auto& r : batch.items) {
    if (!r.has_lexical())
      throw ConfigError(std::string("view ") + kind_name + ": record '" + r.id +
                        "' has no word vectors");
    if (r.word_vecs[0].size() != expect_dim)
      throw ConfigError(std::string("view ") + kind_name + ": record '" + r.id +
                        "' word dimension " + std::to_string(r.word_vecs[0].size()) +
                        " != configured " + std::to_string(expect_dim));
    max_words = std::max(max_words, r.word_count());
  }
  SeqTensor seq;
  seq.lengths.resize(b);
  std::vector<double> mask(b * max_words, 0.0);
  for (std::size_t w = 0; w < max_words; ++w) {
    std::vector<double> vals(b * expect_dim, 0.0);
    for (std::size_t i = 0; i < b; ++i)
      if (w < batch.items[i].word_count())
        std::copy(batch.items[i].word_vecs[w].begin(),
                  batch.items[i].word_vecs[w].end(), vals.begin() + i * expect_dim);
    seq.steps.push_back(Tensor::from(std::move(vals), {b, expect_dim}));
  }
  for (std::size_t i = 0; i < b; ++i) {
    seq.lengths[i] = static_cast<int>(batch.items[i].word_count());
    for (std::size_t w = 0; w < batch.items[i].word_count(); ++w)
      mask[i * max_words + w] = 1.0;
  }
  seq.mask = Tensor::from(std::move(mask), {b, max_words});
  return seq;
}

std::vector<std::vector<std::array<int, 2>>> batch_filtered_spans(const Batch& batch) {
  std::vector<std::vector<std::array<int, 2>>> spans;
  spans.reserve(batch.items.size());
  for (const auto& r : batch.items) {
    if (r.alignment.empty())
      throw ConfigError("view: record '" + r.id + "' has no word alignment");
    spans.push_back(remap_spans(r));
  }
  return spans;
}

Tensor word_mask_from_counts(const std::vector<int>& counts, std::size_t max_words) {
  const std::size_t b = counts.size();
  std::vector<double> mask(b * max_words, 0.0);
  for (std::size_t i = 0; i < b; ++i)
    for (int w = 0; w < counts[i]; ++w) mask[i * max_words + w] = 1.0;
  return Tensor::from(std::move(mask), {b, max_words});
}

}  // namespace

SeqTensor speaker_frame_filter(const UtteranceRecord& u) {
  Batch single;
  single.items.push_back(u);
  return build_frames_seq(single, true, u.frames[0].size());
}

SeqTensor acoustic_word_encode(const SeqTensor& frames,
                               const std::vector<std::vector<std::array<int, 2>>>& spans,
                               const BiLstm& enc, WordReadout readout) {
  const std::size_t b = frames.batch();
  if (spans.size() != b)
    throw DimError("acoustic_word_encode: spans for " + std::to_string(spans.size()) +
                   " items, batch is " + std::to_string(b));
  std::vector<int> counts(b);
  std::size_t max_words = 0;
  for (std::size_t i = 0; i < b; ++i) {
    int prev_end = 0;
    for (std::size_t w = 0; w < spans[i].size(); ++w) {
      const auto [s, e] = spans[i][w];
      if (s < 0 || e > frames.lengths[i] || s >= e)
        throw DataError("alignment: item " + std::to_string(i) + " span " +
                        std::to_string(w) + " [" + std::to_string(s) + ", " +
                        std::to_string(e) + ") empty or out of bounds (" +
                        std::to_string(frames.lengths[i]) + " frames)");
      if (s < prev_end)
        throw DataError("alignment: item " + std::to_string(i) + " span " +
                        std::to_string(w) + " overlaps the previous span");
      prev_end = e;
    }
    counts[i] = static_cast<int>(spans[i].size());
    max_words = std::max(max_words, spans[i].size());
  }
  if (max_words == 0) throw DataError("alignment: no words in batch");

  SeqTensor hidden = enc.forward(frames);
  const std::size_t t_count = hidden.step_count();
  const std::size_t hid = enc.hidden_dim;

  SeqTensor words;
  words.lengths = counts;
  words.mask = word_mask_from_counts(counts, max_words);
  for (std::size_t w = 0; w < max_words; ++w) {
    if (readout == WordReadout::span_edges) {
      std::vector<double> end_w(b * t_count, 0.0), start_w(b * t_count, 0.0);
      for (std::size_t i = 0; i < b; ++i)
        if (w < spans[i].size()) {
          end_w[i * t_count + (spans[i][w][1] - 1)] = 1.0;
          start_w[i * t_count + spans[i][w][0]] = 1.0;
        }
      Tensor at_end =
          attend_steps(hidden.steps, Tensor::from(std::move(end_w), {b, t_count}));
      Tensor at_start =
          attend_steps(hidden.steps, Tensor::from(std::move(start_w), {b, t_count}));
      words.steps.push_back(concat_cols(slice_cols(at_end, 0, hid),
                                        slice_cols(at_start, hid, hid)));
    } else {
      std::vector<double> weights(b * t_count, 0.0);
      for (std::size_t i = 0; i < b; ++i)
        if (w < spans[i].size()) {
          const auto [s, e] = spans[i][w];
          for (int t = s; t < e; ++t)
            weights[i * t_count + t] = 1.0 / static_cast<double>(e - s);
        }
      words.steps.push_back(
          attend_steps(hidden.steps, Tensor::from(std::move(weights), {b, t_count})));
    }
  }
  return words;
}

// ---- forward -----------------------------------------------------------------

namespace {

struct FusedWords {
  SeqTensor seq;
  Tensor gate;  // [batch, words] data-only, GMU kinds
};

// GMU fusion over all word positions at once: the per-word vectors are
// stacked into one modality matrix per channel, batch-normalized over the
// valid rows, gated, and split back into steps.
FusedWords gmu_fuse(ViewParams& vp, const SeqTensor& aw, const SeqTensor& wv,
                    bool training) {
  const std::size_t b = aw.batch();
  const std::size_t n_words = aw.step_count();
  std::vector<double> row_mask_vals(b * n_words, 0.0);
  for (std::size_t w = 0; w < n_words; ++w)
    for (std::size_t i = 0; i < b; ++i)
      row_mask_vals[w * b + i] = aw.mask.at(i, w);
  Tensor row_mask = Tensor::from(std::move(row_mask_vals), {b * n_words});

  Tensor acoustic = concat_rows(aw.steps);
  Tensor lexical = concat_rows(wv.steps);
  Tensor a_bn = vp.bn_acoustic.forward_masked(acoustic, row_mask, training);
  Tensor l_bn = vp.bn_lexical.forward_masked(lexical, row_mask, training);
  GmuOutput fused = gmu_forward(a_bn, l_bn, vp.gmu);

  FusedWords out;
  out.seq.mask = aw.mask;
  out.seq.lengths = aw.lengths;
  std::vector<double> gate_vals(b * n_words, 0.0);
  const std::size_t gate_dim = vp.gmu.hidden_dim;
  for (std::size_t w = 0; w < n_words; ++w) {
    out.seq.steps.push_back(slice_rows(fused.h, w * b, b));
    for (std::size_t i = 0; i < b; ++i) {
      if (aw.mask.at(i, w) == 0.0) continue;
      double acc = 0.0;
      for (std::size_t j = 0; j < gate_dim; ++j)
        acc += fused.z.at(w * b + i, j);
      gate_vals[i * n_words + w] = acc / static_cast<double>(gate_dim);
    }
  }
  out.gate = Tensor::from(std::move(gate_vals), {b, n_words});
  return out;
}

SeqTensor concat_fuse(const SeqTensor& aw, const SeqTensor& wv) {
  SeqTensor out;
  out.mask = aw.mask;
  out.lengths = aw.lengths;
  for (std::size_t w = 0; w < aw.step_count(); ++w)
    out.steps.push_back(concat_cols(aw.steps[w], wv.steps[w]));
  return out;
}

}  // namespace

ViewOutput view_forward(ViewParams& vp, const Batch& batch, RunMode mode,
                        Rng* dropout_rng) {
  const ViewConfig& cfg = vp.cfg;
  if (batch.items.empty()) throw ContractError("view_forward: empty batch");
  const bool training = mode == RunMode::train;
  if (training && cfg.dropout_p > 0.0 && dropout_rng == nullptr)
    throw ContractError("view_forward: training mode needs a dropout rng");
  const std::size_t b = batch.items.size();

  ViewOutput out;
  Tensor h;

  switch (cfg.kind) {
    case ViewKind::b_aco_1:
    case ViewKind::b_aco_2: {
      SeqTensor seq = build_frames_seq(batch, cfg.kind == ViewKind::b_aco_2,
                                       cfg.frame_feat_dim);
      h = mean_pool(vp.frame_lstm.forward(seq));
      break;
    }
    case ViewKind::b_aco_1_attn: {
      SeqTensor seq = build_frames_seq(batch, false, cfg.frame_feat_dim);
      AttnOutput att = context_attention(vp.frame_lstm.forward(seq), vp.attn);
      h = att.pooled;
      out.attn = att.weights;
      out.word_counts = seq.lengths;
      break;
    }
    case ViewKind::b_lex: {
      SeqTensor words = build_words_seq(batch, cfg.word_vec_dim, to_string(cfg.kind));
      h = mean_pool(vp.word_lstm.forward(words));
      break;
    }
    case ViewKind::b_mm_1:
    case ViewKind::b_mm_2: {
      SeqTensor frames = build_frames_seq(batch, cfg.kind == ViewKind::b_mm_2,
                                          cfg.frame_feat_dim);
      SeqTensor words = build_words_seq(batch, cfg.word_vec_dim, to_string(cfg.kind));
      Tensor pooled_a = mean_pool(vp.frame_lstm.forward(frames));
      Tensor pooled_l = mean_pool(vp.word_lstm.forward(words));
      h = concat_cols(pooled_a, pooled_l);
      break;
    }
    case ViewKind::h_aco_1: {
      SeqTensor frames = build_frames_seq(batch, true, cfg.frame_feat_dim);
      SeqTensor words = acoustic_word_encode(frames, batch_filtered_spans(batch),
                                             vp.frame_lstm, cfg.readout);
      h = mean_pool(words);
      break;
    }
    case ViewKind::h_mm_1:
    case ViewKind::h_mm_2:
    case ViewKind::h_mm_3:
    case ViewKind::h_mm_4: {
      SeqTensor frames = build_frames_seq(batch, true, cfg.frame_feat_dim);
      SeqTensor aw = acoustic_word_encode(frames, batch_filtered_spans(batch),
                                          vp.frame_lstm, cfg.readout);
      SeqTensor wv = build_words_seq(batch, cfg.word_vec_dim, to_string(cfg.kind));
      for (std::size_t i = 0; i < b; ++i)
        if (aw.lengths[i] != wv.lengths[i])
          throw DataError("record '" + batch.items[i].id + "': " +
                          std::to_string(aw.lengths[i]) + " aligned words vs " +
                          std::to_string(wv.lengths[i]) + " word vectors");
      SeqTensor fused;
      if (cfg.uses_gmu()) {
        FusedWords fw = gmu_fuse(vp, aw, wv, training);
        fused = std::move(fw.seq);
        out.gate = fw.gate;
      } else {
        fused = concat_fuse(aw, wv);
      }
      SeqTensor hidden = vp.word_lstm.forward(fused);
      if (cfg.uses_attention()) {
        AttnOutput att = context_attention(hidden, vp.attn);
        h = att.pooled;
        out.attn = att.weights;
      } else {
        h = mean_pool(hidden);
      }
      out.word_counts = aw.lengths;
      break;
    }
  }

  Tensor before_cls = h;
  if (training && cfg.dropout_p > 0.0)
    before_cls = dropout(before_cls, cfg.dropout_p, true, *dropout_rng);
  Tensor logits = affine(before_cls, vp.cls_w, vp.cls_b);
  out.y_hat = softmax_masked(logits, Tensor::full({b, cfg.num_classes}, 1.0));
  out.h = h;
  return out;
}

// ---- checkpoints ----------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'E', 'M', 'O', 'R', 'E', 'C', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw IoError("checkpoint: truncated file");
  return value;
}

}  // namespace

void save_checkpoint(const ViewParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  const std::string cfg_text = params.cfg.to_kv_text();
  write_pod(out, static_cast<std::uint32_t>(cfg_text.size()));
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

  NamedTensors tensors = params.named();
  write_pod(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d = 0; d < tensor.rank(); ++d)
      write_pod(out, static_cast<std::uint64_t>(tensor.extent(d)));
    out.write(reinterpret_cast<const char*>(tensor.data().data()),
              static_cast<std::streamsize>(tensor.data().size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint: write failed for '" + path + "'");
}

ViewParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("checkpoint '" + path + "': bad magic");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion)
    throw DataError("checkpoint '" + path + "': unsupported version " +
                    std::to_string(version));
  const auto cfg_len = read_pod<std::uint32_t>(in);
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), cfg_len);
  if (!in) throw IoError("checkpoint: truncated config");

  ViewParams params = ViewParams::init(ViewConfig::from_kv_text(cfg_text), 0);
  NamedTensors tensors = params.named();
  const auto count = read_pod<std::uint32_t>(in);
  if (count != tensors.size())
    throw DataError("checkpoint '" + path + "': expected " +
                    std::to_string(tensors.size()) + " tensors, found " +
                    std::to_string(count));
  for (auto& [name, tensor] : tensors) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string file_name(name_len, '\0');
    in.read(file_name.data(), name_len);
    if (file_name != name)
      throw DataError("checkpoint '" + path + "': tensor '" + file_name +
                      "' where '" + name + "' was expected");
    const auto rank = read_pod<std::uint32_t>(in);
    if (rank != tensor.rank())
      throw DataError("checkpoint '" + path + "': rank mismatch for '" + name + "'");
    for (std::size_t d = 0; d < rank; ++d) {
      const auto extent = read_pod<std::uint64_t>(in);
      if (extent != tensor.extent(d))
        throw DataError("checkpoint '" + path + "': shape mismatch for '" + name +
                        "'");
    }
    in.read(reinterpret_cast<char*>(tensor.data().data()),
            static_cast<std::streamsize>(tensor.data().size() * sizeof(double)));
    if (!in) throw IoError("checkpoint: truncated tensor data");
  }
  return params;
}

}  // namespace emorec
