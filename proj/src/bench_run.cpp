#include <algorithm>
#include <chrono>
#include <fstream>
#include <thread>

#include "promptrl/bench.hpp"
#include "promptrl/metrics.hpp"

namespace promptrl {
namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const ArmRow* StudyReport::row(std::string_view arm, std::string_view metric) const {
  for (const auto& r : rows) {
    if (r.arm == arm && r.metric == metric) return &r;
  }
  return nullptr;
}

const TestRow* StudyReport::test(std::string_view a, std::string_view b, std::string_view metric) const {
  for (const auto& t : tests) {
    if (t.metric == metric && ((t.arm_a == a && t.arm_b == b) || (t.arm_a == b && t.arm_b == a))) return &t;
  }
  return nullptr;
}

namespace {

struct UnitResult {
  double dice = 0.0;
  std::optional<double> hd95;
  double wall_time = 0.0;
};

struct ArmResults {
  std::string label;
  std::vector<UnitResult> units;
};

// Runs fn(unit, segmenter) over [0, n) with `jobs` workers, each owning a
// segmenter. Results land by index, so the outcome is order-independent.
template <class Fn>
void parallel_units(std::size_t n, int jobs, const SegmenterConfig& seg, Fn fn) {
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  auto work = [&](std::size_t begin) {
    auto segmenter = make_segmenter(seg);
    for (std::size_t i = begin; i < n; i += static_cast<std::size_t>(jobs)) fn(i, *segmenter);
  };
  if (jobs == 1) {
    work(0);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(jobs);
  for (int j = 0; j < jobs; ++j) {
    threads.emplace_back([&, j] {
      try {
        work(static_cast<std::size_t>(j));
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

TestRow paired_row(const std::string& a, const std::string& b, const std::string& metric,
                   const std::vector<double>& xs, const std::vector<double>& ys) {
  TestRow row{a, b, metric, std::string(to_string(TestMethod::PairedT)), 0.0, 1.0};
  if (xs.size() < 2) return row;
  try {
    const TestResult t = paired_t_test(xs, ys);
    row.statistic = t.statistic;
    row.p_value = t.p_value;
  } catch (const Error& e) {
    // Identical paired outcomes: no evidence of a difference.
    if (e.code() != ErrorCode::DegenerateSample) throw;
  }
  return row;
}

void summarise_arms(StudyReport& report, const std::vector<ArmResults>& arms,
                    const std::string& seed_hash) {
  for (const auto& arm : arms) {
    report.arms.push_back(arm.label);
    std::vector<double> d, h, w;
    for (const auto& u : arm.units) {
      d.push_back(u.dice);
      if (u.hd95) h.push_back(*u.hd95);
      w.push_back(u.wall_time);
    }
    report.unit_dice.push_back(d);
    for (const auto& [metric, values] :
         {std::pair{"dice", &d}, std::pair{"hd95", &h}, std::pair{"wall_time", &w}}) {
      const Summary s = summarize(*values);
      report.rows.push_back({arm.label, metric, s.mean, s.sd, s.n, seed_hash});
    }
  }
  for (std::size_t i = 0; i < arms.size(); ++i) {
    for (std::size_t j = i + 1; j < arms.size(); ++j) {
      const auto& a = arms[i];
      const auto& b = arms[j];
      std::vector<double> da, db, ha, hb, wa, wb;
      for (std::size_t u = 0; u < a.units.size(); ++u) {
        da.push_back(a.units[u].dice);
        db.push_back(b.units[u].dice);
        if (a.units[u].hd95 && b.units[u].hd95) {
          ha.push_back(*a.units[u].hd95);
          hb.push_back(*b.units[u].hd95);
        }
        wa.push_back(a.units[u].wall_time);
        wb.push_back(b.units[u].wall_time);
      }
      report.tests.push_back(paired_row(a.label, b.label, "dice", da, db));
      report.tests.push_back(paired_row(a.label, b.label, "hd95", ha, hb));
      const TestResult mw = mann_whitney_u(wa, wb);
      report.tests.push_back({a.label, b.label, "wall_time", std::string(to_string(mw.method)),
                              mw.statistic, mw.p_value});
    }
  }
}

json base_metadata(const ExperimentConfig& cfg, const RunOptions& opts) {
  return json{{"version", kVersion},
              {"study", to_string(cfg.study)},
              {"name", cfg.name},
              {"seed", cfg.seed},
              {"config_hash", hex64(fnv1a64(cfg.source.dump()))},
              {"config", cfg.source},
              {"timing", !opts.no_timing}};
}

StudyReport run_point_study(const ExperimentConfig& cfg, const RunOptions& opts) {
  const std::vector<LabeledCase> cases = cfg.dataset.load();
  const std::size_t units = cases.size() * static_cast<std::size_t>(cfg.repetitions);
  auto unit_seed = [&](std::size_t u) {
    return mix_seed(mix_seed(cfg.seed, u / cfg.repetitions), u % cfg.repetitions);
  };

  struct Arm {
    std::string label;
    Location location;
    std::function<int(std::uint64_t)> count;
  };
  std::vector<Arm> arms;
  if (cfg.study == Study::PointNumber) {
    arms.push_back({"1", cfg.location, [](std::uint64_t) { return 1; }});
    arms.push_back({"2-4", cfg.location,
                    [](std::uint64_t s) { return Rng(mix_seed(s, 1)).uniform_int(2, 4); }});
    arms.push_back({"5+", cfg.location,
                    [](std::uint64_t s) { return Rng(mix_seed(s, 2)).uniform_int(5, 8); }});
  } else {
    const int n = cfg.point_count;
    for (Location l : {Location::Center, Location::Surface, Location::Union}) {
      arms.push_back({std::string(to_string(l)), l, [n](std::uint64_t) { return n; }});
    }
  }

  std::string seed_text;
  for (std::size_t u = 0; u < units; ++u) {
    seed_text += cases[u / cfg.repetitions].id + ":" + hex64(unit_seed(u)) + ";";
  }
  const std::string seed_hash = hex64(fnv1a64(seed_text));

  std::vector<ArmResults> results;
  for (const Arm& arm : arms) {
    ArmResults res{arm.label, std::vector<UnitResult>(units)};
    parallel_units(units, opts.jobs, cfg.segmenter, [&](std::size_t u, Segmenter& seg) {
      const LabeledCase& c = cases[u / cfg.repetitions];
      const std::uint64_t s = unit_seed(u);
      const auto t0 = std::chrono::steady_clock::now();
      const PromptSample sample = sample_prompts(c, arm.location, arm.count(s), mix_seed(s, 3), cfg.delta);
      const Mask m = binarize(seg.predict(c.image, sample.prompts));
      UnitResult r;
      r.wall_time = opts.no_timing ? 0.0
                                   : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      r.dice = dice(m, c.truth);
      if (!m.empty()) r.hd95 = hd95(m, c.truth, c.image.spacing());
      res.units[u] = r;
    });
    results.push_back(std::move(res));
  }

  StudyReport report;
  report.study = std::string(to_string(cfg.study));
  report.metadata = base_metadata(cfg, opts);
  report.metadata["units"] = units;
  report.metadata["cases"] = cases.size();
  report.metadata["repetitions"] = cfg.repetitions;
  if (cfg.study == Study::PointNumber) {
    report.metadata["location"] = to_string(cfg.location);
  } else {
    report.metadata["point_count"] = cfg.point_count;
  }
  summarise_arms(report, results, seed_hash);
  return report;
}

StudyReport run_agent_study(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (cfg.checkpoint.empty()) throw Error(ErrorCode::MissingModel, "agent study needs agent.checkpoint");
  GatedQNetwork net = load_checkpoint(cfg.checkpoint);
  const std::vector<LabeledCase> cases = cfg.dataset.load();
  const RegionPool pool = build_region_pool(cases.front().image.width(), cases.front().image.height(),
                                            cfg.agent.grid, cfg.agent.grid);
  if (net.state_dim() != static_cast<int>(pool.size()) * kStateFeatures) {
    throw Error(ErrorCode::InvalidConfig, "checkpoint was trained for a different region grid");
  }

  std::vector<Policy> policies{{&net, std::nullopt, "agent"}};
  for (BaselineMode m : cfg.baselines) policies.push_back({nullptr, m, std::string(to_string(m))});

  std::string seed_text;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    for (const auto& c : cases) seed_text += c.id + ":" + hex64(mix_seed(cfg.seed, rep)) + ";";
  }
  seed_text += "ensemble:" + hex64(cfg.ensemble.jitter_seed);
  const std::string seed_hash = hex64(fnv1a64(seed_text));

  StudyReport report;
  report.study = std::string(to_string(cfg.study));
  std::vector<ArmResults> results;
  for (const Policy& p : policies) {
    ArmResults arm{p.label, {}};
    std::vector<std::vector<double>> curves;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
      EvalOptions eo;
      eo.budget = cfg.agent.budget;
      eo.grid = cfg.agent.grid;
      eo.seed = mix_seed(cfg.seed, rep);
      eo.ensemble = cfg.ensemble;
      eo.kl_mode = cfg.agent.kl_mode;
      eo.stop = cfg.stop;
      eo.jobs = opts.jobs;
      eo.report_step = cfg.report_step;
      const EvalResult r = evaluate_policy(p, cases, cfg.segmenter, eo);
      for (std::size_t i = 0; i < cases.size(); ++i) {
        arm.units.push_back({r.dice[i][cfg.report_step], r.hd95[i], opts.no_timing ? 0.0 : r.wall_time[i]});
        curves.push_back(r.dice[i]);
      }
    }
    for (int t = 0; t <= cfg.agent.budget; ++t) {
      std::vector<double> col;
      for (const auto& c : curves) col.push_back(c[t]);
      const Summary s = summarize(col);
      report.curves.push_back({p.label, t, s.mean, s.sd});
    }
    results.push_back(std::move(arm));
  }
  report.metadata = base_metadata(cfg, opts);
  report.metadata["cases"] = cases.size();
  report.metadata["repetitions"] = cfg.repetitions;
  report.metadata["budget"] = cfg.agent.budget;
  report.metadata["report_step"] = cfg.report_step;
  report.metadata["ensemble_members"] = cfg.ensemble.members;
  report.metadata["reference_manual_times_s"] = {
      {"note", "published radiologist annotation means; static reference, not reproduced"},
      {"MRI ovarian", 237.0},
      {"MRI renal", 150.6},
      {"CT lung", 286.8},
      {"US breast", 12.6}};
  summarise_arms(report, results, seed_hash);
  return report;
}

StudyReport run_conformance_study(const ExperimentConfig& cfg, const RunOptions& opts) {
  StudyReport report;
  report.study = std::string(to_string(cfg.study));
  report.metadata = base_metadata(cfg, opts);
  json checks = json::object();
  auto add = [&](const std::string& arm, const std::vector<ConformanceCheck>& list) {
    std::size_t passed = 0;
    json items = json::array();
    for (const auto& c : list) {
      passed += c.passed;
      items.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    }
    report.arms.push_back(arm);
    report.rows.push_back({arm, "checks_passed", list.empty() ? 0.0 : double(passed) / list.size(), 0.0,
                           list.size(), ""});
    report.unit_dice.emplace_back();
    checks[arm] = items;
  };
  SegmenterConfig builtin = cfg.segmenter;
  builtin.backend = Backend::Builtin;
  BuiltinSegmenter local(builtin);
  add("builtin", contract_suite(local));
  std::vector<ConformanceCheck> bridge = protocol_suite(cfg.segmenter.bridge_endpoint);
  try {
    BridgeSegmenter remote(cfg.segmenter.bridge_endpoint);
    const auto contract = contract_suite(remote);
    bridge.insert(bridge.end(), contract.begin(), contract.end());
  } catch (const Error& e) {
    bridge.push_back({"contract.connect", false, e.what()});
  }
  add("bridge", bridge);
  report.metadata["checks"] = checks;
  return report;
}

}  // namespace

StudyReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  switch (cfg.study) {
    case Study::PointNumber:
    case Study::PointLocation: return run_point_study(cfg, opts);
    case Study::AgentVsBaselines: return run_agent_study(cfg, opts);
    case Study::ProtocolConformance: return run_conformance_study(cfg, opts);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown study");
}

TrainResult train_from_config(const ExperimentConfig& cfg, const fs::path& out,
                              const std::function<void(const TrainingLogRow&)>& progress) {
  if (!cfg.train_dataset) throw Error(ErrorCode::InvalidConfig, "training needs agent.train_dataset");
  cfg.agent.validate();
  const std::vector<LabeledCase> cases = cfg.train_dataset->load();
  TrainResult result = train_agent(cases, cfg.agent, cfg.segmenter, progress);
  json extra = {{"episodes", cfg.agent.episodes},
                {"grid", cfg.agent.grid},
                {"budget", cfg.agent.budget},
                {"seed", cfg.agent.seed},
                {"config_hash", hex64(fnv1a64(cfg.source.dump()))}};
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(out, result.net, extra);
  std::ofstream log(out.string() + ".log.csv");
  if (!log) throw Error(ErrorCode::IoError, "cannot write training log next to " + out.string());
  log << training_log_csv(result.log);
  return result;
}

}  // namespace promptrl
