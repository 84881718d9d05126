#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sloguard/calibration.hpp"
#include "sloguard/repair.hpp"
#include "sloguard/rng.hpp"
#include "sloguard/search_space.hpp"

namespace sloguard {

enum class DispatchMode { sequential, concurrent };

struct Workload {
  int num_requests = 5;
  int output_tokens_cap = 100;
  double target_rate_per_s = 1.0;
  int concurrency_cap = 5;
  DispatchMode dispatch_mode = DispatchMode::concurrent;
};

enum class CrashCategory { healthy, startup_failure, preflight_failure, runtime_failure };

std::string to_string(CrashCategory c);
CrashCategory crash_category_from_string(const std::string& s);

struct RequestOutcome {
  double ttft_ms = 0.0;
  std::vector<double> itl_ms;  // one per generated token after the first
  double total_latency_ms = 0.0;
  bool satisfied_slo = false;  // filled in by metrics evaluation
  int output_tokens = 0;
  std::optional<std::string> error;
};

struct BatchResult {
  std::vector<RequestOutcome> requests;
  double batch_wall_clock_ms = 0.0;  // first-issued to last-completed
  CrashCategory crash = CrashCategory::healthy;
};

struct LatencySample {
  double ttft_ms = 0.0;
  std::vector<double> itl_ms;
  bool runtime_fail = false;
};

// Deterministic (per-seed) stand-in for a serving engine. Exposes the same
// start / preflight / dispatch pipeline a live engine driver would, so a real
// backend can be swapped in without touching the optimizers.
class ServingSimulator {
 public:
  explicit ServingSimulator(SimCalibration cal = {}) : cal_(cal) {}

  struct EngineHandle {
    Config config;
    HardwareProfile hw;
  };

  // Fails iff the KV geometry exceeds the token budget (warmup OOM).
  std::optional<EngineHandle> start_engine(const Config& config, const HardwareProfile& hw) const;

  // Fails iff the config carries the eager/chunked-prefill flag conflict, in
  // which case the engine cannot serve a single-token completion.
  bool preflight(const EngineHandle& handle) const;

  BatchResult dispatch_batch(const EngineHandle& handle, const Workload& workload, Rng& rng) const;

  // Per-request service model. in_flight counts this request plus everything
  // still running when it starts.
  LatencySample latency_model(const Config& config, const HardwareProfile& hw, DispatchMode mode,
                              int in_flight, int output_tokens, Rng& rng) const;

  // Noise-free mean total latency of one request under this model; used by
  // calibration checks.
  double expected_request_latency_ms(const Config& config, DispatchMode mode, int in_flight,
                                     int output_tokens) const;

  const SimCalibration& calibration() const { return cal_; }

 private:
  SimCalibration cal_;
};

// Full pipeline: start -> preflight -> dispatch, short-circuiting to the
// earliest failing stage's crash category.
BatchResult run_benchmark(const ServingSimulator& sim, const Config& config,
                          const HardwareProfile& hw, const Workload& workload, Rng& rng);

}  // namespace sloguard
