#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cli_app.hpp"
#include "e2/pipeline.hpp"
#include "e2/window_store.hpp"
#include "testutil.hpp"

using namespace e2;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "e2_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

// tiny-but-complete settings so pipeline commands finish in seconds
std::vector<std::string> tiny_args(const std::string& out) {
  return {
      "--set", "run.out_dir=" + out,
      "--set", "signal.synthetic_per_emotion=2",
      "--set", "signal.synthetic_duration_s=25",
      "--set", "signal.synthetic_channels=4",
      "--set", "dataset.train_samples=16",
      "--set", "dataset.eval_epc=2",
      "--set", "dataset.eval_ess=2",
      "--set", "dataset.eval_eim=2",
      "--set", "dataset.eval_esr=2",
      "--set", "model.d_e=8",
      "--set", "model.d_llm=8",
      "--set", "model.patch_len=128",
      "--set", "model.encoder_heads=2",
      "--set", "model.lm_heads=2",
      "--set", "model.lm_layers=1",
      "--set", "model.summary_tokens=2",
      "--set", "model.lora_rank=2",
      "--set", "model.lora_alpha=4",
      "--set", "train.stage1.epochs=1",
      "--set", "train.stage2.epochs=1",
      "--set", "train.stage3.epochs=1",
      "--set", "train.stage3_samples=4",
      "--set", "eval.max_tokens=4",
  };
}

int run(std::vector<std::string> args, const std::vector<std::string>& extra) {
  for (const auto& e : extra) args.push_back(e);
  return run_cli(args);
}

}  // namespace

TEST_CASE("exit codes: configuration problems are code 2") {
  CHECK(run_cli({"--config", "/no/such/file.cfg", "preprocess", "--synthetic", "7"}) == 2);
  CHECK(run_cli({"--set", "bogus.key=1", "preprocess"}) == 2);
  std::string out = fresh_dir("codes");
  // synthesize before preprocess: missing stores is a config error naming them
  CHECK(run(tiny_args(out), {"synthesize"}) == 2);
  // bad subcommand flags are parse errors
  CHECK(run_cli({"train", "--stage", "9"}) == 2);
}

TEST_CASE("preprocess is deterministic and balanced") {
  std::string out = fresh_dir("pre");
  auto args = tiny_args(out);
  REQUIRE(run(args, {"preprocess", "--synthetic", "14"}) == 0);
  uint64_t h1 = testutil::file_hash(paths::train_store(out));
  uint64_t t1 = testutil::file_hash(paths::test_store(out));

  auto train = load_windows(paths::train_store(out));
  std::array<int64_t, kNumEmotions> counts{};
  for (auto& w : train) counts[static_cast<size_t>(w.emotion)]++;
  for (auto c : counts) CHECK(c == counts[0]);  // balanced across the 7 classes

  REQUIRE(run(args, {"preprocess", "--synthetic", "14"}) == 0);
  CHECK(testutil::file_hash(paths::train_store(out)) == h1);
  CHECK(testutil::file_hash(paths::test_store(out)) == t1);
}

TEST_CASE("full tiny pipeline: synthesize, train, evaluate, report") {
  std::string out = fresh_dir("full");
  auto args = tiny_args(out);
  REQUIRE(run(args, {"preprocess", "--synthetic", "14"}) == 0);
  REQUIRE(run(args, {"synthesize"}) == 0);

  // synthesize twice -> identical bytes
  uint64_t h1 = testutil::file_hash(paths::train_jsonl(out));
  REQUIRE(run(args, {"synthesize"}) == 0);
  CHECK(testutil::file_hash(paths::train_jsonl(out)) == h1);

  REQUIRE(run(args, {"train", "--stage", "all"}) == 0);
  CHECK(fs::exists(paths::stage_ckpt(out, 1)));
  CHECK(fs::exists(paths::stage_ckpt(out, 2)));
  CHECK(fs::exists(paths::stage_ckpt(out, 3)));
  CHECK(fs::exists(paths::final_ckpt(out)));
  CHECK(fs::exists(paths::loss_csv(out, 1)));

  auto summary = nlohmann::json::parse(std::ifstream(paths::train_summary(out)));
  CHECK(summary["stages"].size() == 3);
  for (const auto& s : summary["stages"]) {
    CHECK(s["status"] == "ran");
    CHECK(s["frozen_intact"].get<bool>());
  }

  REQUIRE(run(args, {"evaluate", "--source", "model"}) == 0);
  CHECK(fs::exists(paths::report_json(out)));
  CHECK(fs::exists(paths::confusion_csv(out)));

  // evaluate is deterministic: identical report bytes on rerun
  uint64_t r1 = testutil::file_hash(paths::report_json(out));
  REQUIRE(run(args, {"evaluate", "--source", "model"}) == 0);
  CHECK(testutil::file_hash(paths::report_json(out)) == r1);

  REQUIRE(run(args, {"report", out}) == 0);
  CHECK(fs::exists(out + "/report.md"));
  uint64_t m1 = testutil::file_hash(out + "/report.md");
  REQUIRE(run(args, {"report", out}) == 0);
  CHECK(testutil::file_hash(out + "/report.md") == m1);  // idempotent

  // evaluate with an echo-gold answers file gives perfect metrics
  std::string gold = out + "/gold.jsonl";
  {
    std::ofstream os(gold, std::ios::trunc);
    for (const auto& p : {paths::eval_ied(out), paths::eval_multi(out), paths::eval_esr(out)})
      for (const auto& s : deserialize_samples(p)) {
        nlohmann::ordered_json j;
        j["id"] = s.id;
        j["text"] = "Answer: " + s.answer_key;
        os << j.dump() << "\n";
      }
  }
  REQUIRE(run(args, {"evaluate", "--source", "file", "--answers", gold}) == 0);
  auto report = nlohmann::json::parse(std::ifstream(paths::report_json(out)));
  CHECK(report["balanced_accuracy"].get<double>() == doctest::Approx(1.0));
  CHECK(report["task_accuracy"]["ESR"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("skip-stage ablations are labeled and run end to end") {
  std::string out = fresh_dir("ablate");
  auto args = tiny_args(out);
  REQUIRE(run(args, {"preprocess", "--synthetic", "14"}) == 0);
  REQUIRE(run(args, {"synthesize"}) == 0);
  REQUIRE(run(args, {"train", "--stage", "all", "--skip-stage", "1"}) == 0);

  auto summary = nlohmann::json::parse(std::ifstream(paths::train_summary(out)));
  REQUIRE(summary["ablations"].size() == 1);
  CHECK(summary["ablations"][0].get<std::string>() == "w/o Stage 1");
  CHECK(summary["stages"][0]["status"] == "skipped");
  CHECK(summary["stages"][1]["status"] == "ran");

  // single-stage run without its prerequisite errors out as config misuse
  std::string out2 = fresh_dir("ablate2");
  auto args2 = tiny_args(out2);
  REQUIRE(run(args2, {"preprocess", "--synthetic", "14"}) == 0);
  REQUIRE(run(args2, {"synthesize"}) == 0);
  CHECK(run(args2, {"train", "--stage", "2"}) == 2);
  CHECK(run(args2, {"train", "--stage", "2", "--skip-stage", "1"}) == 0);
}

TEST_CASE("resume without a snapshot is a configuration error") {
  std::string out = fresh_dir("resume");
  auto args = tiny_args(out);
  REQUIRE(run(args, {"preprocess", "--synthetic", "14"}) == 0);
  REQUIRE(run(args, {"synthesize"}) == 0);
  CHECK(run(args, {"train", "--stage", "1", "--resume"}) == 2);
  // snapshots appear once checkpoint-every is active on a multi-epoch stage
  auto args2 = tiny_args(out);
  args2.push_back("--set");
  args2.push_back("train.stage1.epochs=3");
  REQUIRE(run(args2, {"train", "--stage", "1", "--checkpoint-every", "1"}) == 0);
  CHECK(fs::exists(paths::stage_state(out, 1)));
  CHECK(run(args2, {"train", "--stage", "1", "--resume"}) == 0);
}

TEST_CASE("no-cot synthesis flows through the pipeline") {
  std::string out = fresh_dir("nocot");
  auto args = tiny_args(out);
  REQUIRE(run(args, {"preprocess", "--synthetic", "14"}) == 0);
  REQUIRE(run(args, {"synthesize", "--no-cot"}) == 0);
  for (const auto& s : deserialize_samples(paths::train_jsonl(out))) validate_cot(s, false);
}

TEST_CASE("report on an empty directory is an error") {
  std::string out = fresh_dir("empty");
  CHECK(run_cli({"report", out}) == 1);
  CHECK(run_cli({"report", out + "/definitely-missing"}) == 1);
}
