#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sloguard/calibration.hpp"
#include "sloguard/metrics.hpp"
#include "sloguard/optimizer.hpp"
#include "sloguard/repair.hpp"
#include "sloguard/simulator.hpp"

namespace sloguard {

struct StudySpec {
  std::string optimizer_name = "tba-tpe";
  uint64_t seed = 42;
  int budget = 15;
  Workload workload;
  SloThresholds slo;
  HardwareProfile hw;
  OptimizerParams params;
  SimCalibration calibration;
  std::string output_path;  // empty = in-memory only
};

// Everything about one executed trial, serialized one JSON object per line.
// Field names are frozen in docs/trial_record_schema.md.
struct TrialRecord {
  std::string optimizer;
  uint64_t seed = 0;
  int trial_index = 0;  // 1-based, unique within a study
  Phase phase = Phase::explore;
  Config raw_config;
  Config repaired_config;
  std::vector<std::string> repair_actions;
  CrashCategory crash_category = CrashCategory::healthy;
  std::vector<RequestOutcome> requests;
  double batch_wall_clock_ms = 0.0;
  TrialMetrics metrics;
  std::string timestamp;  // wall time, excluded from determinism guarantees

  nlohmann::json to_json() const;
  static TrialRecord from_json(const nlohmann::json& j);
  Observation to_observation() const;
};

// Append-only JSON-lines writer; every append is flushed and fsynced before
// returning so a later process kill loses no completed trial.
class TrialLogWriter {
 public:
  explicit TrialLogWriter(const std::string& path);
  ~TrialLogWriter();
  TrialLogWriter(const TrialLogWriter&) = delete;
  TrialLogWriter& operator=(const TrialLogWriter&) = delete;

  void append(const TrialRecord& record);

 private:
  std::FILE* file_ = nullptr;
  std::string path_;
};

std::vector<TrialRecord> read_trial_log(const std::string& path);

// Canonical log name for one (optimizer, seed) pair.
std::string study_log_name(const std::string& optimizer_name, uint64_t seed);

// Proposes, repairs, executes, evaluates, persists, then feeds the optimizer.
// Per-trial RNG streams are children of (study seed, trial index).
TrialRecord run_trial(const StudySpec& spec, Optimizer& optimizer, int trial_index,
                      TrialLogWriter* writer);

// Replays persisted records through a fresh optimizer so its state matches a
// live run at the same point. Gaps or foreign records refuse to resume.
void resume_replay(const StudySpec& spec, std::span<const TrialRecord> persisted,
                   Optimizer& optimizer);

// Runs (or resumes) one study to its budget; returns all records.
std::vector<TrialRecord> run_study(const StudySpec& spec);

struct MultiseedOutcome {
  struct StudyStatus {
    std::string optimizer;
    uint64_t seed = 0;
    int records = 0;
    int new_records = 0;
    bool completed = false;
    std::string error;  // empty when the study succeeded
  };
  std::vector<StudyStatus> studies;
  bool all_ok() const;
};

// Executes the (optimizer x seed) matrix with per-trial alternation between
// optimizers inside each seed, so partial completion stays balanced. Completed
// pairs are skipped; per-study failures are isolated. jobs > 1 parallelizes
// across seeds.
MultiseedOutcome run_multiseed(const StudySpec& base, const std::vector<std::string>& optimizers,
                               const std::vector<uint64_t>& seeds,
                               const std::filesystem::path& output_dir, int jobs = 1);

// Per-study summary of a trial log, in execution order.
SeedSummary summarize_study(std::span<const TrialRecord> records);

}  // namespace sloguard
