#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "promptrl/bench.hpp"
#include "promptrl/case_io.hpp"

namespace promptrl {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Study s) {
  switch (s) {
    case Study::PointNumber: return "point_number";
    case Study::PointLocation: return "point_location";
    case Study::AgentVsBaselines: return "agent_vs_baselines";
    case Study::ProtocolConformance: return "protocol_conformance";
  }
  return "?";
}

Study study_from_string(std::string_view name) {
  for (Study s : {Study::PointNumber, Study::PointLocation, Study::AgentVsBaselines,
                  Study::ProtocolConformance}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown study '" + std::string(name) + "'");
}

namespace {

[[noreturn]] void config_fail(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

// Reads typed members of one JSON object and rejects unknown keys.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) config_fail(where_ + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      config_fail(where_ + "." + key + " has the wrong type");
    }
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) config_fail("unknown key " + where_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

DatasetConfig parse_dataset(const json& j, const fs::path& base, const std::string& where) {
  ObjectReader r(j, where);
  DatasetConfig d;
  if (r.has("synthetic")) d.synthetic = synthetic_spec_from_json(r.at("synthetic"));
  r.read("count", d.count);
  std::string dir;
  r.read("directory", dir);
  r.finish();
  if (!dir.empty()) d.directory = fs::path(dir).is_absolute() ? fs::path(dir) : base / dir;
  if (d.synthetic.has_value() == !d.directory.empty()) {
    config_fail(where + " needs exactly one of synthetic or directory");
  }
  if (d.synthetic && d.count < 1) config_fail(where + ".count must be >= 1");
  return d;
}

SegmenterConfig parse_segmenter(const json& j) {
  ObjectReader r(j, "segmenter");
  SegmenterConfig s;
  std::string backend = "builtin";
  r.read("backend", backend);
  if (backend == "builtin") {
    s.backend = Backend::Builtin;
  } else if (backend == "bridge") {
    s.backend = Backend::Bridge;
  } else {
    config_fail("segmenter.backend must be builtin or bridge");
  }
  r.read("tolerance", s.tolerance);
  r.read("smoothing_sigma", s.smoothing_sigma);
  r.read("bridge_endpoint", s.bridge_endpoint);
  r.read("prior_strength", s.prior_strength);
  r.read("prior_contrast", s.prior_contrast);
  r.finish();
  return s;
}

EnsembleConfig parse_ensemble(const json& j) {
  ObjectReader r(j, "ensemble");
  EnsembleConfig e;
  r.read("members", e.members);
  r.read("jitter_seed", e.jitter_seed);
  r.read("tolerance_jitter", e.tolerance_jitter);
  r.read("seed_jitter", e.seed_jitter);
  r.finish();
  return e;
}

void parse_agent(const json& j, const fs::path& base, ExperimentConfig& cfg) {
  ObjectReader r(j, "agent");
  std::string ckpt;
  r.read("checkpoint", ckpt);
  if (!ckpt.empty()) cfg.checkpoint = fs::path(ckpt).is_absolute() ? fs::path(ckpt) : base / ckpt;
  if (r.has("train_dataset")) cfg.train_dataset = parse_dataset(r.at("train_dataset"), base, "agent.train_dataset");
  AgentConfig& a = cfg.agent;
  r.read("episodes", a.episodes);
  r.read("gamma", a.gamma);
  r.read("batch_size", a.batch_size);
  r.read("target_sync", a.target_sync);
  r.read("replay_capacity", a.replay_capacity);
  r.read("epsilon_start", a.epsilon_start);
  r.read("epsilon_end", a.epsilon_end);
  r.read("epsilon_decay_fraction", a.epsilon_decay_fraction);
  r.read("budget", a.budget);
  r.read("grid", a.grid);
  r.read("seed", a.seed);
  r.read("learning_rate", a.sgd.learning_rate);
  r.read("momentum", a.sgd.momentum);
  r.read("weight_decay", a.sgd.weight_decay);
  std::string kl = "max";
  r.read("kl_mode", kl);
  if (kl == "max") {
    a.kl_mode = KlMode::Max;
  } else if (kl == "sum") {
    a.kl_mode = KlMode::Sum;
  } else {
    config_fail("agent.kl_mode must be max or sum");
  }
  r.read("report_step", cfg.report_step);
  if (r.has("stop")) {
    ObjectReader s(r.at("stop"), "agent.stop");
    StopCriterion crit;
    s.read("q_threshold", crit.q_threshold);
    s.read("patience", crit.patience);
    s.finish();
    cfg.stop = crit;
  }
  if (r.has("baselines")) {
    std::vector<std::string> names;
    r.read("baselines", names);
    cfg.baselines.clear();
    for (const auto& n : names) cfg.baselines.push_back(baseline_from_string(n));
  }
  r.finish();
}

}  // namespace

SyntheticSpec synthetic_spec_from_json(const json& j) {
  ObjectReader r(j, "synthetic");
  SyntheticSpec s;
  std::string preset;
  r.read("preset", preset);
  if (!preset.empty()) {
    try {
      s = synthetic_preset(preset);
    } catch (const Error& e) {
      config_fail(e.what());
    }
  }
  r.read("width", s.width);
  r.read("height", s.height);
  if (r.has("spacing_mm")) {
    std::vector<double> sp;
    r.read("spacing_mm", sp);
    if (sp.size() != 2) config_fail("synthetic.spacing_mm needs two values");
    s.spacing = {sp[0], sp[1]};
  }
  r.read("diameter_min_mm", s.diameter_min_mm);
  r.read("diameter_max_mm", s.diameter_max_mm);
  r.read("blob_min", s.blob_min);
  r.read("blob_max", s.blob_max);
  r.read("min_axis_ratio", s.min_axis_ratio);
  r.read("attach_spread", s.attach_spread);
  r.read("contrast_min", s.contrast_min);
  r.read("contrast_max", s.contrast_max);
  r.read("plateau_separation", s.plateau_separation);
  r.read("background_level", s.background_level);
  r.read("background_variation", s.background_variation);
  r.read("noise_amplitude", s.noise_amplitude);
  r.read("speckle", s.speckle);
  r.read("speckle_strength", s.speckle_strength);
  r.read("impulse_fraction", s.impulse_fraction);
  r.read("impulse_min_depth", s.impulse_min_depth);
  r.read("impulse_offset", s.impulse_offset);
  r.read("distractor_min", s.distractor_min);
  r.read("distractor_max", s.distractor_max);
  r.read("distractor_diameter_mm", s.distractor_diameter_mm);
  r.read("seed", s.seed);
  r.read("dataset_tag", s.dataset_tag);
  r.finish();
  try {
    s.validate();
  } catch (const Error& e) {
    config_fail(e.what());
  }
  return s;
}

json synthetic_spec_to_json(const SyntheticSpec& s) {
  return json{{"width", s.width},
              {"height", s.height},
              {"spacing_mm", {s.spacing.sx, s.spacing.sy}},
              {"diameter_min_mm", s.diameter_min_mm},
              {"diameter_max_mm", s.diameter_max_mm},
              {"blob_min", s.blob_min},
              {"blob_max", s.blob_max},
              {"min_axis_ratio", s.min_axis_ratio},
              {"attach_spread", s.attach_spread},
              {"contrast_min", s.contrast_min},
              {"contrast_max", s.contrast_max},
              {"plateau_separation", s.plateau_separation},
              {"background_level", s.background_level},
              {"background_variation", s.background_variation},
              {"noise_amplitude", s.noise_amplitude},
              {"speckle", s.speckle},
              {"speckle_strength", s.speckle_strength},
              {"impulse_fraction", s.impulse_fraction},
              {"impulse_min_depth", s.impulse_min_depth},
              {"impulse_offset", s.impulse_offset},
              {"distractor_min", s.distractor_min},
              {"distractor_max", s.distractor_max},
              {"distractor_diameter_mm", s.distractor_diameter_mm},
              {"seed", s.seed},
              {"dataset_tag", s.dataset_tag}};
}

std::vector<LabeledCase> DatasetConfig::load() const {
  if (synthetic) return generate_suite(*synthetic, count);
  std::vector<LabeledCase> cases = load_case_directory(directory);
  if (cases.empty()) throw Error(ErrorCode::InvalidConfig, "no cases under " + directory.string());
  if (count > 0 && static_cast<std::size_t>(count) < cases.size()) cases.erase(cases.begin() + count, cases.end());
  return cases;
}

void ExperimentConfig::validate() const {
  if (repetitions < 1) config_fail("repetitions must be >= 1");
  if (point_count < 1) config_fail("point_count must be >= 1");
  if (delta < 0) config_fail("delta must be >= 0");
  if (ensemble.members < 1) config_fail("ensemble.members must be >= 1");
  segmenter.validate();
  if (study == Study::AgentVsBaselines) {
    agent.validate();
    if (report_step < 0 || report_step > agent.budget) config_fail("report_step must be within the budget");
  }
  if (study == Study::ProtocolConformance && segmenter.bridge_endpoint.empty()) {
    config_fail("protocol_conformance needs segmenter.bridge_endpoint");
  }
  for (const auto& f : formats) {
    if (f != "csv" && f != "json" && f != "svg") config_fail("unknown output format '" + f + "'");
  }
}

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  ObjectReader r(doc, "config");
  int schema = 0;
  r.read("schema", schema);
  if (schema != kConfigSchema) config_fail("config schema must be " + std::to_string(kConfigSchema));
  ExperimentConfig cfg;
  cfg.source = doc;
  std::string study;
  r.read("study", study);
  if (study.empty()) config_fail("config needs a study");
  cfg.study = study_from_string(study);
  r.read("name", cfg.name);
  r.read("seed", cfg.seed);
  r.read("repetitions", cfg.repetitions);
  if (r.has("dataset")) {
    cfg.dataset = parse_dataset(r.at("dataset"), base_dir, "dataset");
  } else if (cfg.study != Study::ProtocolConformance) {
    config_fail("config needs a dataset");
  }
  if (r.has("segmenter")) cfg.segmenter = parse_segmenter(r.at("segmenter"));
  if (r.has("ensemble")) cfg.ensemble = parse_ensemble(r.at("ensemble"));
  std::string location;
  r.read("location", location);
  if (!location.empty()) {
    try {
      cfg.location = location_from_string(location);
    } catch (const Error& e) {
      config_fail(e.what());
    }
  }
  r.read("point_count", cfg.point_count);
  r.read("delta", cfg.delta);
  if (r.has("agent")) parse_agent(r.at("agent"), base_dir, cfg);
  if (r.has("formats")) r.read("formats", cfg.formats);
  r.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::MissingFile, "config " + file.string() + " not found");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    config_fail("config " + file.string() + ": " + e.what());
  }
  return parse_config(doc, file.parent_path().empty() ? fs::path(".") : file.parent_path());
}

}  // namespace promptrl
