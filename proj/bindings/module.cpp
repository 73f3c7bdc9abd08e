#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "emorec/metrics.hpp"
#include "emorec/trainer.hpp"

namespace py = pybind11;
using namespace emorec;

namespace {

SynthSpec spec_from_dict(const py::dict& d) {
  SynthSpec spec;
  auto geti = [&](const char* key, int fallback) {
    return d.contains(key) ? d[key].cast<int>() : fallback;
  };
  auto getf = [&](const char* key, double fallback) {
    return d.contains(key) ? d[key].cast<double>() : fallback;
  };
  spec.sessions = geti("sessions", spec.sessions);
  spec.speakers_per_session = geti("speakers_per_session", spec.speakers_per_session);
  spec.utterances_per_speaker =
      geti("utterances_per_speaker", spec.utterances_per_speaker);
  spec.frame_feat_dim = geti("frame_feat_dim", spec.frame_feat_dim);
  spec.word_vec_dim = geti("word_vec_dim", spec.word_vec_dim);
  spec.min_words = geti("min_words", spec.min_words);
  spec.max_words = geti("max_words", spec.max_words);
  spec.min_frames_per_word = geti("min_frames_per_word", spec.min_frames_per_word);
  spec.max_frames_per_word = geti("max_frames_per_word", spec.max_frames_per_word);
  spec.min_silence = geti("min_silence", spec.min_silence);
  spec.max_silence = geti("max_silence", spec.max_silence);
  spec.alpha = getf("alpha", spec.alpha);
  spec.frame_noise = getf("frame_noise", spec.frame_noise);
  spec.word_noise = getf("word_noise", spec.word_noise);
  spec.acoustic_scale = getf("acoustic_scale", spec.acoustic_scale);
  spec.lexical_scale = getf("lexical_scale", spec.lexical_scale);
  spec.acoustic_class_gain = getf("acoustic_class_gain", spec.acoustic_class_gain);
  spec.distractor_class_leak =
      getf("distractor_class_leak", spec.distractor_class_leak);
  spec.lexical_class_gain = getf("lexical_class_gain", spec.lexical_class_gain);
  spec.distractor_vocab = geti("distractor_vocab", spec.distractor_vocab);
  if (d.contains("class_signal_in_cue_span_only"))
    spec.class_signal_in_cue_span_only =
        d["class_signal_in_cue_span_only"].cast<bool>();
  if (d.contains("class_proportions"))
    spec.class_proportions = d["class_proportions"].cast<std::vector<double>>();
  spec.validate();
  return spec;
}

py::dict eval_to_dict(const EvalResult& result) {
  py::dict out;
  out["ua"] = result.ua;
  out["accuracy"] = result.plain_accuracy;
  py::list confusion;
  for (int t = 0; t < kNumClasses; ++t) {
    py::list row;
    for (int p = 0; p < kNumClasses; ++p) row.append(result.confusion[t][p]);
    confusion.append(row);
  }
  out["confusion"] = confusion;
  py::list recall;
  for (int c = 0; c < kNumClasses; ++c) recall.append(result.per_class_recall[c]);
  out["per_class_recall"] = recall;
  return out;
}

py::dict generate_corpus(const py::dict& spec_dict, std::uint64_t seed,
                         const std::string& out_path) {
  SynthSpec spec = spec_from_dict(spec_dict);
  Corpus corpus = synth_generate(spec, seed);
  save_corpus(corpus, out_path);
  std::array<long, kNumClasses> counts{};
  for (const auto& r : corpus.records) counts[static_cast<int>(r.label)]++;
  py::dict out;
  out["size"] = corpus.size();
  out["frame_dim"] = corpus.frame_dim();
  out["word_dim"] = corpus.word_dim();
  for (int c = 0; c < kNumClasses; ++c)
    out[to_string(static_cast<Emotion>(c))] = counts[c];
  return out;
}

py::dict train_view(const std::string& corpus_path, const std::string& out_dir,
                    const py::dict& options) {
  auto gets = [&](const char* key, const std::string& fallback) {
    return options.contains(key) ? options[key].cast<std::string>() : fallback;
  };
  auto geti = [&](const char* key, long fallback) {
    return options.contains(key) ? options[key].cast<long>() : fallback;
  };
  auto getf = [&](const char* key, double fallback) {
    return options.contains(key) ? options[key].cast<double>() : fallback;
  };

  Corpus corpus = load_corpus(corpus_path);
  auto folds = make_folds(corpus);
  const int fold_id = static_cast<int>(geti("fold", 0));
  if (fold_id < 0 || fold_id >= static_cast<int>(folds.size()))
    throw ConfigError("fold " + std::to_string(fold_id) + " out of range");
  const FoldSplit& fold = folds[fold_id];

  Corpus standardized = corpus;
  FeatureStats stats = z_standardize(standardized, fold.train);

  ViewConfig cfg;
  cfg.kind = view_kind_from_string(gets("view", "B-ACO-1"));
  cfg.hidden_dim = geti("hidden_dim", 256);
  cfg.num_layers = geti("num_layers", 2);
  cfg.frame_feat_dim = corpus.frame_dim();
  cfg.word_vec_dim = corpus.word_dim();
  cfg.dropout_p = getf("dropout_p", 0.5);
  cfg.validate();

  TrainPlan plan;
  plan.mode = train_mode_from_string(gets("mode", "single-view"));
  plan.epochs = static_cast<int>(geti("epochs", 30));
  plan.batch_size = geti("batch", 64);
  plan.lr = getf("lr", 1e-4);
  plan.weights.beta_a = getf("beta_a", 1.0);
  plan.weights.beta_m = getf("beta_m", 0.3);
  plan.weights.margin = getf("margin", 0.5);
  plan.weights.rho = getf("rho", 0.0);
  plan.neg_strategy =
      neg_strategy_from_string(gets("neg_strategy", "acoustically-similar"));
  plan.seed = geti("seed", 0);

  ViewParams view_a = ViewParams::init(cfg, plan.seed * 2 + 1);
  std::optional<ViewParams> view_m;
  if (plan.mode == TrainMode::joint_multiview) {
    ViewConfig cfg2 = cfg;
    cfg2.kind = view_kind_from_string(gets("view2", "H-MM-4"));
    cfg2.validate();
    view_m = ViewParams::init(cfg2, plan.seed * 2 + 2);
  } else if (plan.mode != TrainMode::single_view) {
    view_m = load_checkpoint(gets("teacher", ""));
    view_m->set_trainable(false);
  }

  TrainResult result =
      train(standardized, fold, std::move(view_a), std::move(view_m), plan);

  namespace fsys = std::filesystem;
  fsys::create_directories(out_dir);
  save_checkpoint(result.best_view_a, (fsys::path(out_dir) / "view1.ckpt").string());
  save_stats(stats, (fsys::path(out_dir) / "stats.json").string());

  py::dict out;
  out["best_val_ua"] = result.best_val_ua;
  out["best_epoch"] = result.best_epoch;
  out["checkpoint"] = (fsys::path(out_dir) / "view1.ckpt").string();
  out["stats"] = (fsys::path(out_dir) / "stats.json").string();
  py::list log;
  for (const auto& e : result.log) {
    py::dict line;
    line["epoch"] = e.epoch;
    line["total"] = e.total;
    line["val_ua"] = e.val_ua;
    log.append(line);
  }
  out["log"] = log;
  return out;
}

py::dict evaluate_checkpoint(const std::string& ckpt_path,
                             const std::string& corpus_path, const std::string& split,
                             int fold_id, const std::string& stats_path,
                             bool strip_lexical_fields) {
  ViewParams params = load_checkpoint(ckpt_path);
  Corpus corpus = load_corpus(corpus_path);
  if (strip_lexical_fields) strip_lexical(corpus);
  if (!stats_path.empty()) apply_frame_stats(corpus, load_stats(stats_path));

  std::vector<std::size_t> indices;
  if (split == "all") {
    indices.resize(corpus.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  } else {
    auto folds = make_folds(corpus);
    const FoldSplit& fold = folds.at(fold_id);
    if (split == "train") indices = fold.train;
    else if (split == "val") indices = fold.val;
    else if (split == "test") indices = fold.test;
    else throw ConfigError("unknown split '" + split + "'");
  }
  EvalResult result = evaluate_view(params, corpus, indices);
  py::dict out = eval_to_dict(result);
  out["view"] = to_string(params.cfg.kind);
  out["samples"] = indices.size();
  return out;
}

py::dict report_attention(const std::string& ckpt_path, const std::string& corpus_path,
                          const std::string& utterance_id,
                          const std::string& stats_path) {
  ViewParams params = load_checkpoint(ckpt_path);
  Corpus corpus = load_corpus(corpus_path);
  if (!stats_path.empty()) apply_frame_stats(corpus, load_stats(stats_path));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.records[i].id != utterance_id) continue;
    Rng unused(0);
    Batch batch = make_batches(corpus, {i}, 1, unused, false)[0];
    ViewOutput view_out = view_forward(params, batch, RunMode::eval);
    AttentionReport rep = attention_report(batch.items[0], view_out, 0, params.cfg.kind);
    py::dict out;
    out["id"] = utterance_id;
    out["tokens"] = batch.items[0].tokens;
    py::list attn, gate;
    for (std::size_t w = 0; w < batch.items[0].word_count(); ++w) {
      attn.append(view_out.attn.defined() ? view_out.attn.at(0, w) : -1.0);
      gate.append(view_out.gate.defined() ? view_out.gate.at(0, w) : -1.0);
    }
    out["attention"] = attn;
    out["gate_acoustic"] = gate;
    out["text"] = rep.text;
    out["svg"] = rep.svg;
    return out;
  }
  throw ConfigError("unknown utterance id '" + utterance_id + "'");
}

py::dict ua_from_labels(const std::vector<std::string>& labels,
                        const std::vector<std::string>& predictions) {
  std::vector<Emotion> y, p;
  for (const auto& s : labels) y.push_back(emotion_from_string(s));
  for (const auto& s : predictions) p.push_back(emotion_from_string(s));
  return eval_to_dict(unweighted_accuracy(y, p));
}

double gradient_check_demo(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> vals(6);
  for (auto& v : vals) v = rng.uniform(-1.0, 1.0);
  Tensor x = Tensor::from(vals, {2, 3}, true);
  auto f = [](Tensor& t) { return sum(mul(emorec::tanh(t), emorec::tanh(t))); };
  return grad_check(f, x, 1e-5);
}

}  // namespace

PYBIND11_MODULE(_emorec, m) {
  m.doc() = "multimodal and multi-view emotion recognition core";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericError>(m, "NumericError");

  m.def("generate_corpus", &generate_corpus, py::arg("spec"), py::arg("seed"),
        py::arg("out_path"),
        "Generate a deterministic synthetic corpus and write it as JSONL.");
  m.def("train_view", &train_view, py::arg("corpus"), py::arg("out_dir"),
        py::arg("options") = py::dict(),
        "Train one view (or multi-view plan) on one fold; returns the epoch log "
        "and best-checkpoint path.");
  m.def("evaluate_checkpoint", &evaluate_checkpoint, py::arg("checkpoint"),
        py::arg("corpus"), py::arg("split") = "val", py::arg("fold") = 0,
        py::arg("stats") = "", py::arg("strip_lexical") = false,
        "Evaluate a checkpoint on a fold split; returns UA and the confusion "
        "matrix.");
  m.def("report_attention", &report_attention, py::arg("checkpoint"),
        py::arg("corpus"), py::arg("utterance_id"), py::arg("stats") = "",
        "Per-word gate shares and attention weights for one utterance.");
  m.def("unweighted_accuracy", &ua_from_labels, py::arg("labels"),
        py::arg("predictions"),
        "Macro-averaged recall over the four emotion classes.");
  m.def("gradient_check_demo", &gradient_check_demo, py::arg("seed") = 0,
        "Max relative error of the reverse-mode gradient against finite "
        "differences on a small probe.");
}
