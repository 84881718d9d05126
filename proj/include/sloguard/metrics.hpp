#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sloguard/repair.hpp"
#include "sloguard/simulator.hpp"

namespace sloguard {

inline constexpr double kCrashViolationScore = 1e6;
inline constexpr double kFastClusterThresholdMs = 1000.0;

struct SloThresholds {
  double ttft_p99_ms = 500.0;
  double itl_p99_ms = 100.0;
  // 0 means "derive u*V from the trial's config and hardware profile".
  double memory_bytes = 0.0;
};

struct TrialMetrics {
  bool feasible = false;
  std::optional<double> ttft_p99_ms;
  std::optional<double> itl_p99_ms;
  double memory_bytes = 0.0;
  double goodput_tokens_per_s = 0.0;
  double violation_score = 0.0;
  std::optional<double> avg_latency_ms;
  CrashCategory crash = CrashCategory::healthy;
};

// Nearest-rank percentile: the ceil(p*n)-th smallest value.
double nearest_rank_percentile(std::vector<double> values, double p);

// Feasibility, p99 tail latencies, memory estimate, goodput, and the
// violation score for one completed (possibly crashed) batch. Goodput counts
// only tokens of requests that individually meet the SLO, over the batch
// wall-clock. Crashed trials get goodput 0 and the crash violation score.
TrialMetrics evaluate_trial(const BatchResult& batch, const SloThresholds& slo,
                            const Config& config, const HardwareProfile& hw);

// Sum of relative threshold excesses; crashes dominate everything.
double violation_score(bool crashed, double ttft_p99_ms, double itl_p99_ms, double memory_bytes,
                       double tau_ttft_ms, double tau_itl_ms, double tau_memory_bytes);

// Fast cluster: feasible and average request latency strictly below 1000 ms.
bool is_fast(const TrialMetrics& metrics);

struct SeedSummary {
  std::string optimizer;
  uint64_t seed = 0;
  int budget = 0;
  int fast_count = 0;
  std::optional<int> first_fast;               // 1-based
  std::optional<double> post_hit_consistency;  // none when first fast is absent or last
  std::optional<double> best_latency_ms;       // min avg latency over feasible trials
  int feasible_count = 0;
  int crash_count = 0;
};

SeedSummary seed_summary(std::span<const TrialMetrics> trials);

}  // namespace sloguard
