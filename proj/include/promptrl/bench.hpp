#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptrl/agent.hpp"
#include "promptrl/geometry.hpp"
#include "promptrl/prompts.hpp"
#include "promptrl/segmenter.hpp"
#include "promptrl/synthetic.hpp"

namespace promptrl {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kConfigSchema = 1;

enum class Study { PointNumber, PointLocation, AgentVsBaselines, ProtocolConformance };
std::string_view to_string(Study s);
Study study_from_string(std::string_view name);

// Either a synthetic suite or a directory of case folders.
struct DatasetConfig {
  std::optional<SyntheticSpec> synthetic;
  int count = 0;
  std::filesystem::path directory;

  std::vector<LabeledCase> load() const;
};

struct ExperimentConfig {
  Study study = Study::PointNumber;
  std::string name;
  DatasetConfig dataset;
  int repetitions = 1;
  std::uint64_t seed = 1;
  SegmenterConfig segmenter;
  EnsembleConfig ensemble;

  Location location = Location::Union;  // point-number study
  int point_count = 3;                  // location study
  int delta = kDefaultBandWidth;

  // Agent study and training.
  std::filesystem::path checkpoint;
  std::optional<DatasetConfig> train_dataset;
  AgentConfig agent;
  int report_step = 7;
  std::optional<StopCriterion> stop;
  std::vector<BaselineMode> baselines{BaselineMode::Bald, BaselineMode::Entropy,
                                      BaselineMode::Uniform, BaselineMode::Random};

  std::vector<std::string> formats{"csv", "json", "svg"};
  nlohmann::json source;  // the parsed document, for hashing

  void validate() const;  // throws InvalidConfig
};

// Relative paths resolve against `base_dir`. Throws InvalidConfig.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& file);

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& s);

struct ArmRow {
  std::string arm;
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
  std::string seed_hash;
  bool operator==(const ArmRow&) const = default;
};

struct TestRow {
  std::string arm_a;
  std::string arm_b;
  std::string metric;
  std::string method;
  double statistic = 0.0;
  double p_value = 1.0;
  bool operator==(const TestRow&) const = default;
};

struct CurveRow {
  std::string arm;
  int t = 0;
  double mean = 0.0;
  double sd = 0.0;
  bool operator==(const CurveRow&) const = default;
};

struct StudyReport {
  std::string study;
  std::vector<std::string> arms;
  std::vector<ArmRow> rows;
  std::vector<TestRow> tests;
  std::vector<CurveRow> curves;
  // Per-arm per-unit Dice, kept for plots and downstream analysis.
  std::vector<std::vector<double>> unit_dice;
  nlohmann::json metadata;
  bool operator==(const StudyReport&) const = default;

  const ArmRow* row(std::string_view arm, std::string_view metric) const;
  const TestRow* test(std::string_view a, std::string_view b, std::string_view metric) const;
};

struct RunOptions {
  bool no_timing = false;
  int jobs = 1;
};

StudyReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

nlohmann::json report_to_json(const StudyReport& r);
StudyReport report_from_json(const nlohmann::json& j);
std::string report_csv(const StudyReport& r);
std::string tests_csv(const StudyReport& r);
std::string curves_csv(const StudyReport& r);
std::string report_svg(const StudyReport& r);

// Writes report.csv, tests.csv, report.json, report.svg (and curves.csv when
// curves exist) for the requested formats. Throws IoError.
void emit_report(const StudyReport& r, const std::filesystem::path& dir,
                 const std::vector<std::string>& formats = {"csv", "json", "svg"});

// Trains on cfg.train_dataset and writes the checkpoint plus
// <checkpoint>.log.csv.
TrainResult train_from_config(const ExperimentConfig& cfg, const std::filesystem::path& out,
                              const std::function<void(const TrainingLogRow&)>& progress = {});

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Backend-agnostic contract checks: determinism, bounds, shape, invalid
// prompts, ensemble size.
std::vector<ConformanceCheck> contract_suite(Segmenter& segmenter);

// Wire-level checks against a bridge command: handshake, image round trip,
// predict, error paths, malformed lines, version mismatch. Servers that
// announce themselves as "echo" are additionally checked for exact echo
// payloads and for Dice parity with the in-process computation.
std::vector<ConformanceCheck> protocol_suite(const std::string& command);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace promptrl
