#include "cli_app.hpp"

#include <cstdio>

#include <CLI11.hpp>

#include "e2/pipeline.hpp"

namespace e2 {

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"EEG-to-emotion instruction-tuning pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("-c,--config", config_path, "plain-text key=value configuration file");
  app.add_option("--set", sets, "override a config entry, section.key=value (repeatable)");

  auto* p_pre = app.add_subcommand("preprocess", "condition recordings into window stores");
  p_pre->fallthrough();
  int64_t synthetic_n = 0;
  std::string input_dir;
  p_pre->add_option("--synthetic", synthetic_n, "generate N synthetic fixture recordings");
  p_pre->add_option("--input", input_dir, "directory of raw recordings (meta json + .f32)");

  auto* p_syn = app.add_subcommand("synthesize", "build QA train/eval splits from window stores");
  p_syn->fallthrough();
  bool no_cot = false;
  p_syn->add_flag("--no-cot", no_cot, "emit answer-only responses (ablation format)");

  auto* p_train = app.add_subcommand("train", "run the three-stage curriculum");
  p_train->fallthrough();
  TrainOptions topt;
  p_train->add_option("--stage", topt.stages, "1|2|3|all (default all)");
  p_train->add_option("--skip-stage", topt.skip, "substitute random init for a stage (repeatable)");
  p_train->add_flag("--resume", topt.resume, "continue from a mid-stage state snapshot");
  p_train->add_option("--checkpoint-every", topt.checkpoint_every,
                      "write a mid-stage state snapshot every N epochs");

  auto* p_eval = app.add_subcommand("evaluate", "score a response source on the eval splits");
  p_eval->fallthrough();
  std::string source;
  std::string answers;
  p_eval->add_option("--source", source, "model | file | endpoint");
  p_eval->add_option("--answers", answers, "answers JSONL for --source file");

  auto* p_rep = app.add_subcommand("report", "aggregate run artifacts into report.md");
  p_rep->fallthrough();
  std::string run_dir;
  p_rep->add_option("dir", run_dir, "run directory (default: config out_dir)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = RunConfig::load(config_path, sets);
    if (p_syn->parsed() && no_cot) cfg.cot = false;
    if (p_eval->parsed() && !answers.empty()) cfg.answers_file = answers;

    if (p_pre->parsed()) {
      if (!input_dir.empty()) cfg.input_dir = input_dir;
      cmd_preprocess(cfg, synthetic_n);
    } else if (p_syn->parsed()) {
      cmd_synthesize(cfg);
    } else if (p_train->parsed()) {
      cmd_train(cfg, topt);
    } else if (p_eval->parsed()) {
      cmd_evaluate(cfg, source);
    } else if (p_rep->parsed()) {
      cmd_report(run_dir.empty() ? cfg.out_dir : run_dir);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace e2
