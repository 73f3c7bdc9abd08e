#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const std::string kBin = EMOREC_BIN;
const fs::path kWork = "/tmp/emorec_cli_test";

int run(const std::string& args) {
  const int status = std::system((kBin + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_spec() {
  std::ofstream out(kWork / "spec.json");
  out << R"({"utterances_per_speaker": 8, "frame_feat_dim": 4, "word_vec_dim": 8,)"
      << R"( "min_words": 2, "max_words": 4, "min_frames_per_word": 2,)"
      << R"( "max_frames_per_word": 4, "max_silence": 1, "alpha": 0.5})";
}

std::string corpus() { return (kWork / "corpus.jsonl").string(); }

}  // namespace

TEST_CASE("gen is deterministic") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  write_spec();
  const std::string spec = (kWork / "spec.json").string();
  REQUIRE(run("gen --spec " + spec + " --out " + corpus() + " --seed 7") == 0);
  REQUIRE(run("gen --spec " + spec + " --out " + (kWork / "corpus2.jsonl").string() +
              " --seed 7") == 0);
  CHECK(slurp(corpus()) == slurp(kWork / "corpus2.jsonl"));
  CHECK(run("gen --out missing_dir_zzz/x.jsonl --seed 1 --spec " + spec) == 2);
}

TEST_CASE("train produces checkpoints, logs and a summary; reruns are byte-identical") {
  const std::string common =
      " --corpus " + corpus() +
      " --view B-ACO-1 --mode single-view --folds 0 --epochs 2 --batch 16"
      " --lr 1e-3 --hidden-dim 3 --num-layers 1 --dropout 0.4 --seed 11";
  REQUIRE(run("train --out " + (kWork / "run_a").string() + common) == 0);
  REQUIRE(run("train --out " + (kWork / "run_b").string() + common) == 0);

  for (const char* name : {"fold0/view1.ckpt", "fold0/stats.json", "fold0/epochs.jsonl",
                           "summary.tsv"}) {
    CHECK(fs::exists(kWork / "run_a" / name));
    CHECK(slurp(kWork / "run_a" / name) == slurp(kWork / "run_b" / name));
  }
  CHECK(fs::exists(kWork / "run_a" / "resolved_config.json"));
}

TEST_CASE("config file fills unset flags and flags win") {
  std::ofstream cfg(kWork / "train.json");
  cfg << R"({"view": "B-LEX", "epochs": 1, "batch": 16, "hidden_dim": 3,)"
      << R"( "num_layers": 1, "lr": 0.001, "mode": "single-view", "folds": "0"})";
  cfg.close();
  // --view on the command line overrides the config's B-LEX
  REQUIRE(run("train --config " + (kWork / "train.json").string() + " --corpus " +
              corpus() + " --view B-ACO-2 --out " + (kWork / "run_cfg").string()) == 0);
  const std::string resolved = slurp(kWork / "run_cfg" / "resolved_config.json");
  CHECK(resolved.find("\"view\": \"B-ACO-2\"") != std::string::npos);
  CHECK(resolved.find("\"epochs\": 1") != std::string::npos);

  CHECK(run("train --config nonexistent.json --corpus " + corpus() + " --out " +
            (kWork / "run_x").string()) == 2);
}

TEST_CASE("acoustic checkpoints evaluate on lexically stripped corpora") {
  const std::string aco_ckpt = (kWork / "run_a" / "fold0" / "view1.ckpt").string();
  const std::string stats = (kWork / "run_a" / "fold0" / "stats.json").string();
  REQUIRE(run("eval --ckpt " + aco_ckpt + " --corpus " + corpus() +
              " --split val --folds 0 --stats " + stats + " --strip-lexical --out " +
              (kWork / "eval_aco").string()) == 0);
  CHECK(fs::exists(kWork / "eval_aco" / "eval.json"));
  CHECK(fs::exists(kWork / "eval_aco" / "confusion.txt"));
  CHECK(fs::exists(kWork / "eval_aco" / "confusion.svg"));

  // identical inputs give identical artifacts
  REQUIRE(run("eval --ckpt " + aco_ckpt + " --corpus " + corpus() +
              " --split val --folds 0 --stats " + stats + " --strip-lexical --out " +
              (kWork / "eval_aco2").string()) == 0);
  CHECK(slurp(kWork / "eval_aco" / "eval.json") == slurp(kWork / "eval_aco2" / "eval.json"));
  CHECK(slurp(kWork / "eval_aco" / "confusion.svg") ==
        slurp(kWork / "eval_aco2" / "confusion.svg"));
}

TEST_CASE("multimodal checkpoints reject stripped corpora") {
  // train a tiny H-MM-4 for one epoch
  REQUIRE(run("train --corpus " + corpus() +
              " --view H-MM-4 --mode single-view --folds 0 --epochs 1 --batch 16"
              " --hidden-dim 3 --num-layers 1 --seed 5 --out " +
              (kWork / "run_mm").string()) == 0);
  const std::string mm_ckpt = (kWork / "run_mm" / "fold0" / "view1.ckpt").string();
  CHECK(run("eval --ckpt " + mm_ckpt + " --corpus " + corpus() +
            " --split val --folds 0 --strip-lexical --out " +
            (kWork / "eval_mm").string()) == 2);
  CHECK(run("eval --ckpt " + mm_ckpt + " --corpus " + corpus() +
            " --split val --folds 0 --out " + (kWork / "eval_mm_ok").string()) == 0);
}

TEST_CASE("report pairs and error paths") {
  const std::string mm_ckpt = (kWork / "run_mm" / "fold0" / "view1.ckpt").string();
  REQUIRE(run("report --ckpt " + mm_ckpt + " --corpus " + corpus() +
              " --ids s1_F1_u0 --out " + (kWork / "rep").string()) == 0);
  CHECK(fs::exists(kWork / "rep" / "s1_F1_u0.txt"));
  CHECK(fs::exists(kWork / "rep" / "s1_F1_u0.svg"));

  CHECK(run("report --ckpt " + mm_ckpt + " --corpus " + corpus() +
            " --ids nosuchid --out " + (kWork / "rep2").string()) == 2);

  // a pooling-only checkpoint has nothing to report
  const std::string aco_ckpt = (kWork / "run_a" / "fold0" / "view1.ckpt").string();
  CHECK(run("report --ckpt " + aco_ckpt + " --corpus " + corpus() +
            " --ids s1_F1_u0 --out " + (kWork / "rep3").string()) == 2);

  // frozen mode without a teacher checkpoint
  CHECK(run("train --corpus " + corpus() +
            " --view B-ACO-1 --mode frozen-teacher-kl --folds 0 --epochs 1"
            " --batch 16 --hidden-dim 3 --num-layers 1 --out " +
            (kWork / "run_frozen").string()) == 2);
}
