#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "emorec/metrics.hpp"
#include "emorec/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace emorec;

namespace {

struct RunConfig {
  std::string corpus_path;
  std::string spec_path;
  std::string out;
  std::string view = "B-ACO-1";
  std::string view2 = "H-MM-4";
  std::string mode = "single-view";
  std::string teacher;
  std::string folds = "all";
  std::string neg_strategy = "acoustically-similar";
  std::string split = "val";
  std::string stats_path;
  std::string ids;
  std::string readout = "span_edges";
  bool strip_lex = false;
  bool attention = false;
  bool all_ids = false;
  int jobs = 1;
  std::uint64_t seed = 0;
  int epochs = 30;
  std::size_t batch = 64;
  std::size_t hidden_dim = 256;
  std::size_t num_layers = 2;
  double dropout_p = 0.5;
  double lr = 1e-4;
  double margin = 0.5;
  double beta_a = 1.0;
  double beta_m = 0.3;
  double rho = 0.0;
  double clip_tau = 5.0;
  double l2 = 1e-5;

  json to_json() const {
    json j;
    j["corpus"] = corpus_path;
    j["spec"] = spec_path;
    j["out"] = out;
    j["view"] = view;
    j["view2"] = view2;
    j["mode"] = mode;
    j["teacher"] = teacher;
    j["folds"] = folds;
    j["neg_strategy"] = neg_strategy;
    j["split"] = split;
    j["stats"] = stats_path;
    j["readout"] = readout;
    j["strip_lexical"] = strip_lex;
    j["jobs"] = jobs;
    j["seed"] = seed;
    j["epochs"] = epochs;
    j["batch"] = batch;
    j["hidden_dim"] = hidden_dim;
    j["num_layers"] = num_layers;
    j["dropout_p"] = dropout_p;
    j["lr"] = lr;
    j["margin"] = margin;
    j["beta_a"] = beta_a;
    j["beta_m"] = beta_m;
    j["rho"] = rho;
    j["clip_tau"] = clip_tau;
    j["l2"] = l2;
    return j;
  }
};

// Config-file values fill any option the command line left untouched.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ConfigError("config file '" + path + "' must hold one flat JSON object");
  for (const auto& [key, value] : j.items()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* opt = cmd->get_option_no_throw("--" + flag);
    if (opt == nullptr) throw ConfigError("config file: unknown key '" + key + "'");
    if (opt->count() > 0) continue;  // explicit flags win
    const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    opt->add_result(text);
    opt->run_callback();
  }
}

void write_resolved_config(const RunConfig& cfg, const fs::path& path) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write resolved config '" + path.string() + "'");
  out << cfg.to_json().dump(2) << "\n";
}

std::vector<int> parse_fold_selection(const std::string& text, int fold_count) {
  std::vector<int> picks;
  if (text == "all") {
    for (int f = 0; f < fold_count; ++f) picks.push_back(f);
    return picks;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const int f = std::stoi(item);
    if (f < 0 || f >= fold_count)
      throw ConfigError("fold " + item + " outside 0.." + std::to_string(fold_count - 1));
    picks.push_back(f);
  }
  if (picks.empty()) throw ConfigError("empty fold selection");
  return picks;
}

ViewConfig view_config_for(const RunConfig& run, const std::string& kind_name,
                           const Corpus& corpus) {
  ViewConfig cfg;
  cfg.kind = view_kind_from_string(kind_name);
  cfg.hidden_dim = run.hidden_dim;
  cfg.num_layers = run.num_layers;
  cfg.frame_feat_dim = corpus.frame_dim();
  cfg.word_vec_dim = corpus.word_dim();
  cfg.num_classes = kNumClasses;
  cfg.dropout_p = run.dropout_p;
  cfg.readout = run.readout == "span_mean" ? WordReadout::span_mean
                                           : WordReadout::span_edges;
  cfg.validate();
  return cfg;
}

TrainPlan plan_for(const RunConfig& run) {
  TrainPlan plan;
  plan.mode = train_mode_from_string(run.mode);
  plan.epochs = run.epochs;
  plan.batch_size = run.batch;
  plan.lr = run.lr;
  plan.clip_tau = run.clip_tau;
  plan.l2 = run.l2;
  plan.weights.beta_a = run.beta_a;
  plan.weights.beta_m = run.beta_m;
  plan.weights.margin = run.margin;
  plan.weights.rho = run.rho;
  plan.neg_strategy = neg_strategy_from_string(run.neg_strategy);
  plan.seed = run.seed;
  return plan;
}

// ---- gen ---------------------------------------------------------------------

int cmd_gen(const RunConfig& run) {
  SynthSpec spec = run.spec_path.empty() ? SynthSpec{} : load_synth_spec(run.spec_path);
  spec.validate();
  if (run.out.empty()) throw ConfigError("gen: --out corpus path required");
  Corpus corpus = synth_generate(spec, run.seed);
  save_corpus(corpus, run.out);
  save_synth_spec(spec, run.out + ".resolved.json");

  // distribution table, one row per speaker
  std::map<std::string, std::array<long, kNumClasses>> rows;
  std::map<std::string, int> sessions;
  for (const auto& r : corpus.records) {
    rows[r.speaker][static_cast<int>(r.label)]++;
    sessions[r.speaker] = r.session;
  }
  std::cout << "speaker\ttotal\tanger\thappiness\tneutral\tsadness\n";
  std::array<long, kNumClasses> total{};
  std::vector<std::pair<std::string, std::array<long, kNumClasses>>> ordered(
      rows.begin(), rows.end());
  std::sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
    return std::tie(sessions[a.first], a.first) < std::tie(sessions[b.first], b.first);
  });
  for (const auto& [speaker, counts] : ordered) {
    long row_total = 0;
    for (int c = 0; c < kNumClasses; ++c) {
      row_total += counts[c];
      total[c] += counts[c];
    }
    std::cout << speaker << "\t" << row_total;
    for (int c = 0; c < kNumClasses; ++c) std::cout << "\t" << counts[c];
    std::cout << "\n";
  }
  std::cout << "all\t" << corpus.size();
  for (int c = 0; c < kNumClasses; ++c) std::cout << "\t" << total[c];
  std::cout << "\n";
  return 0;
}

// ---- train --------------------------------------------------------------------

void write_epoch_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write epoch log '" + path + "'");
  for (const auto& e : log) {
    json j;
    j["epoch"] = e.epoch;
    j["loss_contrastive"] = e.loss_contrastive;
    j["loss_a"] = e.loss_a;
    j["loss_m"] = e.loss_m;
    j["loss_kl"] = e.loss_kl;
    j["total"] = e.total;
    j["clip_factor_mean"] = e.clip_factor_mean;
    j["val_ua"] = e.val_ua;
    out << j.dump() << "\n";
  }
}

FoldScores train_one_fold(const RunConfig& run, const Corpus& corpus,
                          const FoldSplit& fold) {
  Corpus standardized = corpus;
  FeatureStats stats = z_standardize(standardized, fold.train);

  TrainPlan plan = plan_for(run);
  plan.seed = run.seed + 1000003ull * static_cast<std::uint64_t>(fold.fold_id);

  ViewParams view_a =
      ViewParams::init(view_config_for(run, run.view, corpus), plan.seed * 2 + 1);
  std::optional<ViewParams> view_m;
  if (plan.mode == TrainMode::joint_multiview) {
    view_m = ViewParams::init(view_config_for(run, run.view2, corpus), plan.seed * 2 + 2);
  } else if (plan.mode == TrainMode::frozen_teacher_ce ||
             plan.mode == TrainMode::frozen_teacher_kl) {
    if (run.teacher.empty())
      throw ConfigError("mode " + run.mode + " needs --teacher <checkpoint>");
    view_m = load_checkpoint(run.teacher);
    view_m->set_trainable(false);
  }

  TrainResult result = train(standardized, fold, std::move(view_a), std::move(view_m), plan);

  const fs::path fold_dir = fs::path(run.out) / ("fold" + std::to_string(fold.fold_id));
  fs::create_directories(fold_dir);
  save_checkpoint(result.best_view_a, (fold_dir / "view1.ckpt").string());
  if (result.best_view_m)
    save_checkpoint(*result.best_view_m, (fold_dir / "view2.ckpt").string());
  save_stats(stats, (fold_dir / "stats.json").string());
  write_epoch_log(result.log, (fold_dir / "epochs.jsonl").string());

  FoldScores scores;
  scores.fold_id = fold.fold_id;
  scores.dev = evaluate_view(result.best_view_a, standardized, fold.val, plan.batch_size);
  scores.test = evaluate_view(result.best_view_a, standardized, fold.test, plan.batch_size);
  return scores;
}

int cmd_train(const RunConfig& run) {
  if (run.out.empty()) throw ConfigError("train: --out directory required");
  if (run.corpus_path.empty()) throw ConfigError("train: --corpus required");
  Corpus corpus = load_corpus(run.corpus_path);
  if (corpus.records.empty()) throw DataError("train: corpus is empty");
  auto folds = make_folds(corpus);
  std::vector<int> picks = parse_fold_selection(run.folds, static_cast<int>(folds.size()));
  fs::create_directories(run.out);
  write_resolved_config(run, fs::path(run.out) / "resolved_config.json");

  std::vector<FoldScores> scores(picks.size());
  const int jobs = std::max(1, std::min<int>(run.jobs, static_cast<int>(picks.size())));
  if (jobs == 1) {
    for (std::size_t k = 0; k < picks.size(); ++k)
      scores[k] = train_one_fold(run, corpus, folds[picks[k]]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(jobs);
    for (int w = 0; w < jobs; ++w)
      workers.emplace_back([&, w] {
        try {
          for (std::size_t k = next++; k < picks.size(); k = next++)
            scores[k] = train_one_fold(run, corpus, folds[picks[k]]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : workers) t.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }

  CrossFoldSummary summary = cross_fold_summary(scores);
  std::ofstream table(fs::path(run.out) / "summary.tsv");
  table << summary.table_tsv;
  std::cout << summary.table_tsv;
  return 0;
}

// ---- eval ----------------------------------------------------------------------

int cmd_eval(const RunConfig& run) {
  if (run.out.empty()) throw ConfigError("eval: --out directory required");
  if (run.teacher.empty()) throw ConfigError("eval: --ckpt required");
  if (run.corpus_path.empty()) throw ConfigError("eval: --corpus required");

  ViewParams params = load_checkpoint(run.teacher);
  Corpus corpus = load_corpus(run.corpus_path);
  if (run.strip_lex) strip_lexical(corpus);
  if (!run.stats_path.empty()) apply_frame_stats(corpus, load_stats(run.stats_path));

  std::vector<std::size_t> split;
  if (run.split == "all") {
    split.resize(corpus.size());
    for (std::size_t i = 0; i < split.size(); ++i) split[i] = i;
  } else {
    auto folds = make_folds(corpus);
    auto picks = parse_fold_selection(run.folds == "all" ? "0" : run.folds,
                                      static_cast<int>(folds.size()));
    const FoldSplit& fold = folds[picks.at(0)];
    if (run.split == "train") split = fold.train;
    else if (run.split == "val") split = fold.val;
    else if (run.split == "test") split = fold.test;
    else throw ConfigError("eval: unknown split '" + run.split + "'");
  }

  fs::create_directories(run.out);
  write_resolved_config(run, fs::path(run.out) / "resolved_config.json");
  EvalResult result = evaluate_view(params, corpus, split, run.batch);
  confusion_render(result, (fs::path(run.out) / "confusion").string());
  json j;
  j["ua"] = result.ua;
  j["accuracy"] = result.plain_accuracy;
  j["view"] = to_string(params.cfg.kind);
  j["split"] = run.split;
  j["samples"] = split.size();
  std::ofstream out(fs::path(run.out) / "eval.json");
  out << j.dump(2) << "\n";
  std::cout << "view " << to_string(params.cfg.kind) << " split " << run.split
            << " ua " << result.ua << " accuracy " << result.plain_accuracy << "\n";

  if (run.attention) {
    Rng unused(0);
    for (const Batch& batch : make_batches(corpus, split, run.batch, unused, false)) {
      ViewOutput view_out = view_forward(params, batch, RunMode::eval);
      for (std::size_t i = 0; i < batch.items.size(); ++i) {
        AttentionReport rep =
            attention_report(batch.items[i], view_out, i, params.cfg.kind);
        const fs::path base = fs::path(run.out) / ("attn_" + batch.items[i].id);
        std::ofstream(base.string() + ".txt") << rep.text;
        std::ofstream(base.string() + ".svg") << rep.svg;
      }
    }
  }
  return 0;
}

// ---- report --------------------------------------------------------------------

int cmd_report(const RunConfig& run) {
  if (run.out.empty()) throw ConfigError("report: --out directory required");
  if (run.teacher.empty()) throw ConfigError("report: --ckpt required");
  if (run.corpus_path.empty()) throw ConfigError("report: --corpus required");

  ViewParams params = load_checkpoint(run.teacher);
  Corpus corpus = load_corpus(run.corpus_path);
  if (!run.stats_path.empty()) apply_frame_stats(corpus, load_stats(run.stats_path));

  std::vector<std::size_t> targets;
  if (run.all_ids) {
    targets.resize(corpus.size());
    for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = i;
  } else {
    if (run.ids.empty()) throw ConfigError("report: --ids or --all required");
    std::stringstream ss(run.ids);
    std::string id;
    while (std::getline(ss, id, ',')) {
      bool found = false;
      for (std::size_t i = 0; i < corpus.size(); ++i)
        if (corpus.records[i].id == id) {
          targets.push_back(i);
          found = true;
          break;
        }
      if (!found) throw ConfigError("report: unknown utterance id '" + id + "'");
    }
  }

  fs::create_directories(run.out);
  write_resolved_config(run, fs::path(run.out) / "resolved_config.json");
  Rng unused(0);
  for (std::size_t idx : targets) {
    Batch batch = make_batches(corpus, {idx}, 1, unused, false)[0];
    ViewOutput out = view_forward(params, batch, RunMode::eval);
    AttentionReport rep = attention_report(batch.items[0], out, 0, params.cfg.kind);
    const fs::path base = fs::path(run.out) / batch.items[0].id;
    std::ofstream(base.string() + ".txt") << rep.text;
    std::ofstream(base.string() + ".svg") << rep.svg;
  }
  std::cout << "wrote " << targets.size() << " report pairs to " << run.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical multimodal emotion recognition at desk scale"};
  app.require_subcommand(1);
  RunConfig run;
  std::string config_path;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat JSON config; flags override");
    cmd->add_option("--seed", run.seed, "rng seed");
    cmd->add_option("--out", run.out, "output path");
  };
  auto add_model_opts = [&](CLI::App* cmd) {
    cmd->add_option("--view", run.view, "view kind, e.g. B-ACO-1 or H-MM-4");
    cmd->add_option("--view2", run.view2, "second view kind for joint mode");
    cmd->add_option("--mode", run.mode,
                    "single-view | joint-multiview | frozen-teacher-ce | "
                    "frozen-teacher-kl");
    cmd->add_option("--teacher", run.teacher, "teacher checkpoint for frozen modes");
    cmd->add_option("--folds", run.folds, "fold selection: all or comma list");
    cmd->add_option("--neg-strategy", run.neg_strategy,
                    "random-diff-class | acoustically-similar");
    cmd->add_option("--epochs", run.epochs, "epoch budget");
    cmd->add_option("--lr", run.lr, "learning rate");
    cmd->add_option("--batch", run.batch, "batch size");
    cmd->add_option("--margin", run.margin, "contrastive margin m");
    cmd->add_option("--beta-a", run.beta_a, "acoustic loss weight");
    cmd->add_option("--beta-m", run.beta_m, "multimodal loss weight");
    cmd->add_option("--rho", run.rho, "beta decay rate over epochs");
    cmd->add_option("--clip-tau", run.clip_tau, "gradient norm cap");
    cmd->add_option("--l2", run.l2, "l2 coefficient");
    cmd->add_option("--hidden-dim", run.hidden_dim, "BLSTM hidden size");
    cmd->add_option("--num-layers", run.num_layers, "BLSTM layers");
    cmd->add_option("--dropout", run.dropout_p, "dropout probability");
    cmd->add_option("--readout", run.readout, "span_edges | span_mean");
    cmd->add_option("--jobs", run.jobs, "parallel folds");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  add_common(gen);
  gen->add_option("--spec", run.spec_path, "generator spec JSON");

  CLI::App* train_cmd = app.add_subcommand("train", "train a view or multi-view plan");
  add_common(train_cmd);
  add_model_opts(train_cmd);
  train_cmd->add_option("--corpus", run.corpus_path, "corpus JSONL");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_option("--corpus", run.corpus_path, "corpus JSONL");
  eval_cmd->add_option("--ckpt", run.teacher, "checkpoint to evaluate");
  eval_cmd->add_option("--split", run.split, "train | val | test | all");
  eval_cmd->add_option("--folds", run.folds, "fold id providing the split");
  eval_cmd->add_option("--stats", run.stats_path, "standardization stats JSON");
  eval_cmd->add_option("--batch", run.batch, "batch size");
  eval_cmd->add_flag("--strip-lexical", run.strip_lex,
                     "drop lexical fields before evaluating");
  eval_cmd->add_flag("--attention", run.attention, "also write attention reports");

  CLI::App* report_cmd = app.add_subcommand("report", "attention/gate reports");
  add_common(report_cmd);
  report_cmd->add_option("--corpus", run.corpus_path, "corpus JSONL");
  report_cmd->add_option("--ckpt", run.teacher, "checkpoint (H-MM-2/3/4)");
  report_cmd->add_option("--ids", run.ids, "comma-separated utterance ids");
  report_cmd->add_option("--stats", run.stats_path, "standardization stats JSON");
  report_cmd->add_flag("--all", run.all_ids, "report every utterance");

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* active = app.get_subcommands().at(0);
    apply_config_file(active, config_path);
    if (active == gen) return cmd_gen(run);
    if (active == train_cmd) return cmd_train(run);
    if (active == eval_cmd) return cmd_eval(run);
    if (active == report_cmd) return cmd_report(run);
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
