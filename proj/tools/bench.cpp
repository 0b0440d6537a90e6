// bench: command-line front end for the prompting experiments.
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "promptrl/bench.hpp"
#include "promptrl/case_io.hpp"

namespace fs = std::filesystem;
using namespace promptrl;

namespace {

int cmd_run(const fs::path& config, const fs::path& out, bool no_timing, int jobs) {
  const ExperimentConfig cfg = load_config(config);
  RunOptions opts;
  opts.no_timing = no_timing;
  opts.jobs = jobs;
  const StudyReport report = run_experiment(cfg, opts);
  emit_report(report, out, cfg.formats);
  for (const ArmRow& r : report.rows) {
    if (r.metric != "dice") continue;
    std::printf("%-16s dice %.4f +/- %.4f (n=%zu)\n", r.arm.c_str(), r.mean, r.sd, r.n);
  }
  std::printf("report written to %s\n", out.string().c_str());
  return 0;
}

int cmd_synth(const fs::path& spec_file, int count, const fs::path& out) {
  std::ifstream in(spec_file);
  if (!in) throw Error(ErrorCode::MissingFile, spec_file.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, spec_file.string() + ": " + e.what());
  }
  const SyntheticSpec spec = synthetic_spec_from_json(doc);
  const std::vector<LabeledCase> cases = generate_suite(spec, count);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "case-%04zu", i);
    save_case(out / name, cases[i]);
  }
  std::printf("%zu cases written to %s\n", cases.size(), out.string().c_str());
  return 0;
}

int cmd_train(const fs::path& config, const fs::path& out) {
  const ExperimentConfig cfg = load_config(config);
  const int every = std::max(1, cfg.agent.episodes / 20);
  train_from_config(cfg, out, [&](const TrainingLogRow& r) {
    if ((r.episode + 1) % every) return;
    std::printf("episode %5d  eps %.3f  return %+.4f  dice %.4f  loss %.5f\n", r.episode + 1, r.epsilon,
                r.episode_return, r.final_dice, r.loss_mean);
    std::fflush(stdout);
  });
  std::printf("checkpoint written to %s\n", out.string().c_str());
  return 0;
}

int report_checks(const std::string& group, const std::vector<ConformanceCheck>& checks) {
  int failed = 0;
  for (const auto& c : checks) {
    std::printf("%s %-40s %s%s%s\n", c.passed ? "PASS" : "FAIL", (group + "/" + c.name).c_str(),
                c.detail.empty() ? "" : "(", c.detail.c_str(), c.detail.empty() ? "" : ")");
    failed += !c.passed;
  }
  return failed;
}

int cmd_conformance(const std::string& bridge) {
  int failed = 0;
  BuiltinSegmenter builtin{SegmenterConfig{}};
  failed += report_checks("builtin", contract_suite(builtin));
  if (!bridge.empty()) {
    failed += report_checks("bridge", protocol_suite(bridge));
    try {
      BridgeSegmenter remote(bridge);
      failed += report_checks("bridge", contract_suite(remote));
    } catch (const Error& e) {
      std::printf("FAIL bridge/contract (%s)\n", e.what());
      ++failed;
    }
  }
  std::printf("%d check(s) failed\n", failed);
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt-strategy benchmark for promptable segmentation"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  fs::path config, out, spec;
  bool no_timing = false;
  int jobs = 1, count = 10;
  std::string bridge;

  auto* run = app.add_subcommand("run", "Run a study and write its report");
  run->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory")->required();
  run->add_flag("--no-timing", no_timing, "Zero wall-clock fields for byte-stable output");
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic case directory");
  synth->add_option("--spec", spec, "Synthetic spec (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--count", count, "Number of cases")->check(CLI::PositiveNumber);
  synth->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train the prompting agent");
  train->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Checkpoint path")->required();

  auto* conf = app.add_subcommand("conformance", "Check segmenter backends against the contract");
  conf->add_option("--bridge", bridge, "Shell command that starts a bridge process");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, out, no_timing, jobs);
    if (*synth) return cmd_synth(spec, count, out);
    if (*train) return cmd_train(config, out);
    if (*conf) return cmd_conformance(bridge);
  } catch (const Error& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "bench: unexpected failure: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
