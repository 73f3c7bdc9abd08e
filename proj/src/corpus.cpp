#include "emorec/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace emorec {

using json = nlohmann::ordered_json;

const char* to_string(Emotion e) {
  switch (e) {
    case Emotion::anger: return "anger";
    case Emotion::happiness: return "happiness";
    case Emotion::neutral: return "neutral";
    case Emotion::sadness: return "sadness";
  }
  throw ContractError("unknown emotion value");
}

Emotion emotion_from_string(const std::string& s) {
  if (s == "anger") return Emotion::anger;
  if (s == "happiness") return Emotion::happiness;
  if (s == "neutral") return Emotion::neutral;
  if (s == "sadness") return Emotion::sadness;
  throw DataError("unknown emotion label '" + s + "'");
}

Emotion acoustically_similar_partner(Emotion e) {
  switch (e) {
    case Emotion::anger: return Emotion::happiness;
    case Emotion::happiness: return Emotion::anger;
    case Emotion::neutral: return Emotion::sadness;
    case Emotion::sadness: return Emotion::neutral;
  }
  throw ContractError("unknown emotion value");
}

void UtteranceRecord::validate() const {
  auto fail = [&](const std::string& what) {
    throw DataError("record '" + id + "': " + what);
  };
  if (frames.empty()) fail("no frames");
  if (speaker_flags.size() != frames.size())
    fail("speaker_flags size " + std::to_string(speaker_flags.size()) +
         " != frame count " + std::to_string(frames.size()));
  const std::size_t dim = frames[0].size();
  if (dim == 0) fail("zero-dimensional frame features");
  for (const auto& f : frames)
    if (f.size() != dim) fail("inconsistent frame feature dimension");
  if (session < 1) fail("session must be >= 1");
  if (speaker.empty()) fail("empty speaker id");

  if (tokens.size() != word_vecs.size() || tokens.size() != alignment.size())
    fail("tokens/word_vecs/alignment counts differ (" +
         std::to_string(tokens.size()) + "/" + std::to_string(word_vecs.size()) +
         "/" + std::to_string(alignment.size()) + ")");
  if (!word_vecs.empty()) {
    const std::size_t wdim = word_vecs[0].size();
    if (wdim == 0) fail("zero-dimensional word vectors");
    for (const auto& w : word_vecs)
      if (w.size() != wdim) fail("inconsistent word vector dimension");
  }
  int prev_end = 0;
  for (std::size_t w = 0; w < alignment.size(); ++w) {
    const auto [start, end] = alignment[w];
    if (start < 0 || end > static_cast<int>(frames.size()) || start >= end)
      fail("span " + std::to_string(w) + " [" + std::to_string(start) + ", " +
           std::to_string(end) + ") is empty or out of bounds");
    if (start < prev_end)
      fail("span " + std::to_string(w) + " overlaps or reorders previous span");
    prev_end = end;
    for (int t = start; t < end; ++t)
      if (!speaker_flags[t])
        fail("span " + std::to_string(w) + " covers non-speaker frame " +
             std::to_string(t));
  }
  if (cue_word >= static_cast<int>(tokens.size()))
    fail("cue_word index out of range");
}

std::size_t Corpus::frame_dim() const {
  return records.empty() ? 0 : records[0].frames[0].size();
}

std::size_t Corpus::word_dim() const {
  for (const auto& r : records)
    if (r.has_lexical()) return r.word_vecs[0].size();
  return 0;
}

void Corpus::validate() const {
  for (const auto& r : records) r.validate();
  if (records.empty()) return;
  const std::size_t fdim = frame_dim();
  const std::size_t wdim = word_dim();
  for (const auto& r : records) {
    if (r.frames[0].size() != fdim)
      throw DataError("record '" + r.id + "': frame dimension differs from corpus");
    if (r.has_lexical() && r.word_vecs[0].size() != wdim)
      throw DataError("record '" + r.id + "': word dimension differs from corpus");
  }
}

// ---- serialization ----------------------------------------------------------

namespace {

json record_to_json(const UtteranceRecord& r) {
  json j;
  j["id"] = r.id;
  j["session"] = r.session;
  j["speaker"] = r.speaker;
  j["label"] = to_string(r.label);
  j["frames"] = r.frames;
  j["speaker_flags"] = json::array();
  for (auto f : r.speaker_flags) j["speaker_flags"].push_back(f != 0);
  j["tokens"] = r.tokens;
  j["word_vecs"] = r.word_vecs;
  j["alignment"] = json::array();
  for (const auto& [s, e] : r.alignment) j["alignment"].push_back({s, e});
  if (r.cue_word >= 0) j["cue_word"] = r.cue_word;
  j["scripted"] = r.scripted;
  return j;
}

UtteranceRecord record_from_json(const json& j, std::size_t line_no) {
  UtteranceRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.session = j.at("session").get<int>();
    r.speaker = j.at("speaker").get<std::string>();
    r.label = emotion_from_string(j.at("label").get<std::string>());
    r.frames = j.at("frames").get<std::vector<std::vector<double>>>();
    for (bool f : j.at("speaker_flags").get<std::vector<bool>>())
      r.speaker_flags.push_back(f ? 1 : 0);
    if (j.contains("tokens")) r.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (j.contains("word_vecs"))
      r.word_vecs = j.at("word_vecs").get<std::vector<std::vector<double>>>();
    if (j.contains("alignment"))
      for (const auto& span : j.at("alignment"))
        r.alignment.push_back({span.at(0).get<int>(), span.at(1).get<int>()});
    r.cue_word = j.value("cue_word", -1);
    r.scripted = j.value("scripted", false);
  } catch (const json::exception& e) {
    throw DataError("line " + std::to_string(line_no) + ": malformed record (" +
                    e.what() + ")");
  }
  r.validate();
  return r;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file '" + path + "'");
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw DataError("line " + std::to_string(line_no) + ": invalid JSON");
    corpus.records.push_back(record_from_json(j, line_no));
  }
  if (corpus.records.empty()) warn("corpus '" + path + "' is empty");
  corpus.validate();
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file '" + path + "'");
  for (const auto& r : corpus.records) out << record_to_json(r).dump() << "\n";
}

void strip_lexical(Corpus& corpus) {
  for (auto& r : corpus.records) {
    r.tokens.clear();
    r.word_vecs.clear();
    r.alignment.clear();
    r.cue_word = -1;
  }
}

// ---- standardization ----------------------------------------------------------

FeatureStats fit_frame_stats(const Corpus& corpus,
                             const std::vector<std::size_t>& fit_indices) {
  if (corpus.records.empty()) throw ContractError("z_standardize: empty corpus");
  const std::size_t dim = corpus.frame_dim();
  std::vector<double> mean(dim, 0.0), sq(dim, 0.0);
  std::size_t count = 0;
  for (std::size_t idx : fit_indices) {
    for (const auto& f : corpus.records.at(idx).frames) {
      for (std::size_t j = 0; j < dim; ++j) {
        mean[j] += f[j];
        sq[j] += f[j] * f[j];
      }
      ++count;
    }
  }
  if (count < 2)
    throw ContractError("z_standardize: needs at least 2 frames in the fitting split");
  FeatureStats stats;
  stats.mean.resize(dim);
  stats.stddev.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    stats.mean[j] = mean[j] / static_cast<double>(count);
    const double var = sq[j] / static_cast<double>(count) - stats.mean[j] * stats.mean[j];
    stats.stddev[j] = var > 0.0 ? std::sqrt(var) : 0.0;
    if (stats.stddev[j] == 0.0)
      warn("z_standardize: zero-variance feature " + std::to_string(j) +
           " maps to 0");
  }
  return stats;
}

void apply_frame_stats(Corpus& corpus, const FeatureStats& stats) {
  for (auto& r : corpus.records)
    for (auto& f : r.frames)
      for (std::size_t j = 0; j < f.size(); ++j)
        f[j] = stats.stddev[j] == 0.0 ? 0.0 : (f[j] - stats.mean[j]) / stats.stddev[j];
}

FeatureStats z_standardize(Corpus& corpus, const std::vector<std::size_t>& fit_indices) {
  FeatureStats stats = fit_frame_stats(corpus, fit_indices);
  apply_frame_stats(corpus, stats);
  return stats;
}

void save_stats(const FeatureStats& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write stats file '" + path + "'");
  json j;
  j["mean"] = stats.mean;
  j["stddev"] = stats.stddev;
  out << j.dump() << "\n";
}

FeatureStats load_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stats file '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("stats file '" + path + "' is invalid JSON");
  FeatureStats stats;
  stats.mean = j.at("mean").get<std::vector<double>>();
  stats.stddev = j.at("stddev").get<std::vector<double>>();
  return stats;
}

// ---- folds ----------------------------------------------------------------------

std::vector<FoldSplit> make_folds(const Corpus& corpus) {
  std::map<int, std::set<std::string>> speakers_by_session;
  for (const auto& r : corpus.records)
    speakers_by_session[r.session].insert(r.speaker);
  for (const auto& [session, speakers] : speakers_by_session)
    if (speakers.size() != 2)
      throw DataError("fold protocol needs exactly 2 speakers per session; session " +
                      std::to_string(session) + " has " +
                      std::to_string(speakers.size()));

  std::vector<FoldSplit> folds;
  for (const auto& [session, speakers] : speakers_by_session) {
    std::vector<std::string> pair(speakers.begin(), speakers.end());
    for (int arrangement = 0; arrangement < 2; ++arrangement) {
      FoldSplit fold;
      fold.fold_id = static_cast<int>(folds.size());
      fold.held_out_session = session;
      fold.val_speaker = pair[arrangement];
      fold.test_speaker = pair[1 - arrangement];
      for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const auto& r = corpus.records[i];
        if (r.session != session)
          fold.train.push_back(i);
        else if (r.speaker == fold.val_speaker)
          fold.val.push_back(i);
        else
          fold.test.push_back(i);
      }
      folds.push_back(std::move(fold));
    }
  }
  return folds;
}

// ---- batching --------------------------------------------------------------------

namespace {

UtteranceRecord truncate_record(const UtteranceRecord& r, int max_frames,
                                int max_words) {
  UtteranceRecord out = r;
  if (static_cast<int>(out.frames.size()) > max_frames) {
    warn("record '" + out.id + "': truncating " + std::to_string(out.frames.size()) +
         " frames to " + std::to_string(max_frames));
    out.frames.resize(max_frames);
    out.speaker_flags.resize(max_frames);
    // drop words whose spans fall past the cap; clamp a span straddling it
    std::size_t keep = 0;
    while (keep < out.alignment.size() && out.alignment[keep][0] < max_frames) ++keep;
    out.alignment.resize(keep);
    out.tokens.resize(keep);
    out.word_vecs.resize(keep);
    for (auto& span : out.alignment) span[1] = std::min(span[1], max_frames);
  }
  if (static_cast<int>(out.word_count()) > max_words) {
    warn("record '" + out.id + "': truncating " + std::to_string(out.word_count()) +
         " words to " + std::to_string(max_words));
    out.tokens.resize(max_words);
    out.word_vecs.resize(max_words);
    out.alignment.resize(max_words);
  }
  if (out.cue_word >= static_cast<int>(out.word_count())) out.cue_word = -1;
  return out;
}

}  // namespace

std::vector<Batch> make_batches(const Corpus& corpus,
                                const std::vector<std::size_t>& split,
                                std::size_t batch_size, Rng& rng, bool shuffle,
                                int max_frames, int max_words) {
  if (split.empty()) throw ContractError("make_batches: empty split");
  if (batch_size == 0) throw ContractError("make_batches: zero batch size");
  std::vector<std::size_t> order = split;
  if (shuffle) {
    // Fisher-Yates on the seeded stream
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
  }
  std::vector<Batch> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    Batch b;
    const std::size_t end = std::min(begin + batch_size, order.size());
    for (std::size_t k = begin; k < end; ++k)
      b.items.push_back(
          truncate_record(corpus.records.at(order[k]), max_frames, max_words));
    batches.push_back(std::move(b));
  }
  return batches;
}

// ---- synthetic generator -----------------------------------------------------------

void SynthSpec::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("synth spec: " + what); };
  if (sessions < 1) fail("sessions must be >= 1");
  if (speakers_per_session != 2) fail("fold protocol expects 2 speakers per session");
  if (utterances_per_speaker < kNumClasses)
    fail("need at least one utterance per class per speaker");
  if (class_proportions.size() != kNumClasses) fail("need 4 class proportions");
  for (double p : class_proportions)
    if (p <= 0.0) fail("class proportions must be positive");
  if (frame_feat_dim < 1 || word_vec_dim < 1) fail("feature dims must be >= 1");
  if (min_words < 1 || max_words < min_words) fail("bad words-per-utterance range");
  if (min_frames_per_word < 1 || max_frames_per_word < min_frames_per_word)
    fail("bad frames-per-word range");
  if (min_silence < 0 || max_silence < min_silence) fail("bad silence range");
  if (alpha < 0.0 || alpha > 1.0) fail("alpha must lie in [0, 1]");
  if (frame_noise <= 0.0 || word_noise <= 0.0) fail("noise scales must be positive");
  if (acoustic_class_gain < 0.0 || lexical_class_gain < 0.0)
    fail("class gains must be non-negative");
  if (distractor_class_leak < 0.0 || distractor_class_leak > 1.0)
    fail("distractor_class_leak must lie in [0, 1]");
  if (distractor_vocab < 2) fail("distractor vocabulary too small");
  const int worst = max_words * (max_frames_per_word + max_silence) + max_silence;
  if (worst > kMaxFrames)
    fail("max utterance length " + std::to_string(worst) + " exceeds the " +
         std::to_string(kMaxFrames) + "-frame cap");
  if (max_words > kMaxWords)
    fail("words per utterance exceed the " + std::to_string(kMaxWords) + "-word cap");
}

namespace {

std::vector<double> random_direction(Rng& rng, int dim, double scale) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x = x / norm * scale;
  return v;
}

// Largest-remainder allocation of n utterances to the 4 classes.
std::vector<int> allocate_classes(const std::vector<double>& proportions, int n) {
  double total = std::accumulate(proportions.begin(), proportions.end(), 0.0);
  std::vector<int> counts(kNumClasses, 0);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double exact = proportions[c] / total * n;
    counts[c] = static_cast<int>(exact);
    assigned += counts[c];
    remainders.push_back({exact - counts[c], c});
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  for (int k = 0; k < n - assigned; ++k) counts[remainders[k % 4].second]++;
  // every class present so negative sampling always has a pool
  for (int c = 0; c < kNumClasses; ++c)
    if (counts[c] == 0) {
      auto big = std::max_element(counts.begin(), counts.end());
      --*big;
      counts[c] = 1;
    }
  return counts;
}

}  // namespace

SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open generator spec '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("generator spec '" + path + "' is invalid JSON");
  SynthSpec s;
  s.sessions = j.value("sessions", s.sessions);
  s.speakers_per_session = j.value("speakers_per_session", s.speakers_per_session);
  s.utterances_per_speaker = j.value("utterances_per_speaker", s.utterances_per_speaker);
  if (j.contains("class_proportions"))
    s.class_proportions = j.at("class_proportions").get<std::vector<double>>();
  s.frame_feat_dim = j.value("frame_feat_dim", s.frame_feat_dim);
  s.word_vec_dim = j.value("word_vec_dim", s.word_vec_dim);
  s.min_words = j.value("min_words", s.min_words);
  s.max_words = j.value("max_words", s.max_words);
  s.min_frames_per_word = j.value("min_frames_per_word", s.min_frames_per_word);
  s.max_frames_per_word = j.value("max_frames_per_word", s.max_frames_per_word);
  s.min_silence = j.value("min_silence", s.min_silence);
  s.max_silence = j.value("max_silence", s.max_silence);
  s.alpha = j.value("alpha", s.alpha);
  s.frame_noise = j.value("frame_noise", s.frame_noise);
  s.word_noise = j.value("word_noise", s.word_noise);
  s.acoustic_scale = j.value("acoustic_scale", s.acoustic_scale);
  s.lexical_scale = j.value("lexical_scale", s.lexical_scale);
  s.acoustic_class_gain = j.value("acoustic_class_gain", s.acoustic_class_gain);
  s.lexical_class_gain = j.value("lexical_class_gain", s.lexical_class_gain);
  s.class_signal_in_cue_span_only =
      j.value("class_signal_in_cue_span_only", s.class_signal_in_cue_span_only);
  s.distractor_class_leak = j.value("distractor_class_leak", s.distractor_class_leak);
  s.distractor_vocab = j.value("distractor_vocab", s.distractor_vocab);
  s.validate();
  return s;
}

void save_synth_spec(const SynthSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write generator spec '" + path + "'");
  json j;
  j["sessions"] = spec.sessions;
  j["speakers_per_session"] = spec.speakers_per_session;
  j["utterances_per_speaker"] = spec.utterances_per_speaker;
  j["class_proportions"] = spec.class_proportions;
  j["frame_feat_dim"] = spec.frame_feat_dim;
  j["word_vec_dim"] = spec.word_vec_dim;
  j["min_words"] = spec.min_words;
  j["max_words"] = spec.max_words;
  j["min_frames_per_word"] = spec.min_frames_per_word;
  j["max_frames_per_word"] = spec.max_frames_per_word;
  j["min_silence"] = spec.min_silence;
  j["max_silence"] = spec.max_silence;
  j["alpha"] = spec.alpha;
  j["frame_noise"] = spec.frame_noise;
  j["word_noise"] = spec.word_noise;
  j["acoustic_scale"] = spec.acoustic_scale;
  j["lexical_scale"] = spec.lexical_scale;
  j["acoustic_class_gain"] = spec.acoustic_class_gain;
  j["lexical_class_gain"] = spec.lexical_class_gain;
  j["class_signal_in_cue_span_only"] = spec.class_signal_in_cue_span_only;
  j["distractor_class_leak"] = spec.distractor_class_leak;
  j["distractor_vocab"] = spec.distractor_vocab;
  out << j.dump(2) << "\n";
}

Corpus synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);

  // Channel strengths. The anger/happiness vs neutral/sadness factor rides on
  // the acoustics, the within-pair factor on the lexical side; the weak
  // full-class components give intermediate alphas room for cross-channel
  // transfer.
  const double a = spec.alpha;
  const double acoustic_factor_strength = std::min(2.0 * a, 1.0);
  const double acoustic_class_strength = a * a * spec.acoustic_class_gain;
  const double lexical_factor_strength = std::min(2.0 * (1.0 - a), 1.0);
  const double lexical_class_strength =
      (1.0 - a) * (1.0 - a) * spec.lexical_class_gain;

  // fixed per-generator directions
  std::vector<std::vector<double>> acoustic_factor_dir, acoustic_class_dir;
  std::vector<std::vector<double>> lexical_factor_dir, lexical_class_dir;
  for (int k = 0; k < 2; ++k)
    acoustic_factor_dir.push_back(
        random_direction(rng, spec.frame_feat_dim, spec.acoustic_scale));
  for (int c = 0; c < kNumClasses; ++c)
    acoustic_class_dir.push_back(
        random_direction(rng, spec.frame_feat_dim, spec.acoustic_scale));
  const std::vector<double> speech_offset =
      random_direction(rng, spec.frame_feat_dim, spec.acoustic_scale * 0.5);
  for (int k = 0; k < 2; ++k)
    lexical_factor_dir.push_back(
        random_direction(rng, spec.word_vec_dim, spec.lexical_scale));
  for (int c = 0; c < kNumClasses; ++c)
    lexical_class_dir.push_back(
        random_direction(rng, spec.word_vec_dim, spec.lexical_scale));
  std::vector<std::vector<double>> vocab;
  for (int v = 0; v < spec.distractor_vocab; ++v) {
    std::vector<double> entry =
        random_direction(rng, spec.word_vec_dim, spec.lexical_scale);
    if (spec.distractor_class_leak > 0.0) {
      const auto& leak = lexical_class_dir[v % kNumClasses];
      for (int j = 0; j < spec.word_vec_dim; ++j)
        entry[j] = (1.0 - spec.distractor_class_leak) * entry[j] +
                   spec.distractor_class_leak * leak[j];
    }
    vocab.push_back(std::move(entry));
  }

  Corpus corpus;
  for (int session = 1; session <= spec.sessions; ++session) {
    for (int sp = 0; sp < spec.speakers_per_session; ++sp) {
      const std::string speaker =
          (sp == 0 ? "F" : "M") + std::to_string(session);
      std::vector<int> counts =
          allocate_classes(spec.class_proportions, spec.utterances_per_speaker);
      std::vector<Emotion> labels;
      for (int c = 0; c < kNumClasses; ++c)
        labels.insert(labels.end(), counts[c], static_cast<Emotion>(c));
      for (std::size_t i = labels.size(); i > 1; --i)
        std::swap(labels[i - 1], labels[rng.uniform_int(i)]);

      for (std::size_t u = 0; u < labels.size(); ++u) {
        UtteranceRecord r;
        r.session = session;
        r.speaker = speaker;
        r.id = "s" + std::to_string(session) + "_" + speaker + "_u" + std::to_string(u);
        r.label = labels[u];
        r.scripted = rng.uniform() < 0.5;
        const int cls = static_cast<int>(r.label);
        const int factor_a = cls / 2;  // 0: anger/happiness, 1: neutral/sadness
        const int factor_l = cls % 2;

        const int n_words =
            spec.min_words +
            static_cast<int>(rng.uniform_int(spec.max_words - spec.min_words + 1));
        r.cue_word = static_cast<int>(rng.uniform_int(n_words));

        auto push_silence = [&](int count) {
          for (int t = 0; t < count; ++t) {
            std::vector<double> f(spec.frame_feat_dim);
            for (auto& x : f) x = rng.normal(0.0, spec.frame_noise);
            r.frames.push_back(std::move(f));
            r.speaker_flags.push_back(0);
          }
        };

        for (int w = 0; w < n_words; ++w) {
          push_silence(spec.min_silence + static_cast<int>(rng.uniform_int(
                                              spec.max_silence - spec.min_silence + 1)));
          const int span_len =
              spec.min_frames_per_word +
              static_cast<int>(
                  rng.uniform_int(spec.max_frames_per_word - spec.min_frames_per_word + 1));
          const int start = static_cast<int>(r.frames.size());
          const bool carries_class_signal =
              !spec.class_signal_in_cue_span_only || w == r.cue_word;
          for (int t = 0; t < span_len; ++t) {
            std::vector<double> f(spec.frame_feat_dim);
            for (int j = 0; j < spec.frame_feat_dim; ++j) {
              double v = speech_offset[j] +
                         acoustic_factor_strength * acoustic_factor_dir[factor_a][j];
              if (carries_class_signal)
                v += acoustic_class_strength * acoustic_class_dir[cls][j];
              f[j] = v + rng.normal(0.0, spec.frame_noise);
            }
            r.frames.push_back(std::move(f));
            r.speaker_flags.push_back(1);
          }
          r.alignment.push_back({start, start + span_len});

          std::vector<double> wv(spec.word_vec_dim, 0.0);
          if (w == r.cue_word) {
            r.tokens.push_back("cue" + std::to_string(cls));
            for (int j = 0; j < spec.word_vec_dim; ++j)
              wv[j] = lexical_factor_strength * lexical_factor_dir[factor_l][j] +
                      lexical_class_strength * lexical_class_dir[cls][j] +
                      rng.normal(0.0, spec.word_noise);
          } else {
            const int v = static_cast<int>(rng.uniform_int(spec.distractor_vocab));
            r.tokens.push_back("w" + std::to_string(v));
            for (int j = 0; j < spec.word_vec_dim; ++j)
              wv[j] = vocab[v][j] + rng.normal(0.0, spec.word_noise);
          }
          r.word_vecs.push_back(std::move(wv));
        }
        push_silence(spec.min_silence +
                     static_cast<int>(
                         rng.uniform_int(spec.max_silence - spec.min_silence + 1)));
        corpus.records.push_back(std::move(r));
      }
    }
  }
  corpus.validate();
  return corpus;
}

}  // namespace emorec
