#include "sloguard/simulator.hpp"

#include <algorithm>
#include <cstring>
#include <set>
#include <stdexcept>

namespace sloguard {

namespace {

constexpr uint64_t kSaltEagerBand = 0x65616765725f6d75ULL;
constexpr uint64_t kSaltConcurrent = 0x636f6e635f6f6666ULL;

uint64_t fnv1a(uint64_t h, uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic per-config value in [0, 1): the config's "personality" in the
// latency bands. Keyed on the full knob tuple so distinct configs get
// independent placements while repeated trials of one config agree.
double config_hash01(const Config& c, uint64_t salt) {
  uint64_t h = 0xcbf29ce484222325ULL ^ salt;
  h = fnv1a(h, c.quantization == "fp8" ? 2 : 1);
  h = fnv1a(h, static_cast<uint64_t>(c.max_num_seqs));
  h = fnv1a(h, static_cast<uint64_t>(c.max_num_batched_tokens));
  uint64_t ubits;
  static_assert(sizeof(ubits) == sizeof(c.gpu_memory_utilization));
  std::memcpy(&ubits, &c.gpu_memory_utilization, sizeof(ubits));
  h = fnv1a(h, ubits);
  h = fnv1a(h, static_cast<uint64_t>(c.max_model_len));
  h = fnv1a(h, (c.enforce_eager ? 1u : 0u) | (c.enable_chunked_prefill ? 2u : 0u) |
                   (c.enable_prefix_caching ? 4u : 0u));
  // One extra mix so low bits are well spread.
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return static_cast<double>((h ^ (h >> 31)) >> 11) * 0x1.0p-53;
}

}  // namespace

std::string to_string(CrashCategory c) {
  switch (c) {
    case CrashCategory::healthy: return "healthy";
    case CrashCategory::startup_failure: return "startup_failure";
    case CrashCategory::preflight_failure: return "preflight_failure";
    case CrashCategory::runtime_failure: return "runtime_failure";
  }
  return "healthy";
}

CrashCategory crash_category_from_string(const std::string& s) {
  if (s == "healthy") return CrashCategory::healthy;
  if (s == "startup_failure") return CrashCategory::startup_failure;
  if (s == "preflight_failure") return CrashCategory::preflight_failure;
  if (s == "runtime_failure") return CrashCategory::runtime_failure;
  throw std::invalid_argument("unknown crash category: " + s);
}

std::optional<ServingSimulator::EngineHandle> ServingSimulator::start_engine(
    const Config& config, const HardwareProfile& hw) const {
  const int64_t geometry = static_cast<int64_t>(config.max_num_seqs) * config.max_model_len;
  if (geometry > kv_token_budget(hw, config.gpu_memory_utilization)) {
    return std::nullopt;  // KV-cache warmup OOM: never reaches /health
  }
  return EngineHandle{config, hw};
}

bool ServingSimulator::preflight(const EngineHandle& handle) const {
  return !(handle.config.enforce_eager && handle.config.enable_chunked_prefill);
}

double ServingSimulator::expected_request_latency_ms(const Config& config, DispatchMode mode,
                                                     int in_flight, int output_tokens) const {
  double eager_mult = 1.0;
  if (config.enforce_eager) {
    eager_mult = cal_.eager_mult_lo +
                 (cal_.eager_mult_hi - cal_.eager_mult_lo) * config_hash01(config, kSaltEagerBand);
  }
  double itl = cal_.itl_base_ms * eager_mult;
  if (config.enable_prefix_caching) itl *= 1.0 - cal_.prefix_caching_discount;
  if (config.quantization == "fp8") itl *= 1.0 - cal_.fp8_discount;
  itl += cal_.contention_itl_ms * (in_flight - 1);

  double ttft = cal_.base_ttft_ms;
  if (mode == DispatchMode::concurrent) {
    ttft += cal_.concurrent_overhead_lo_ms +
            (cal_.concurrent_overhead_hi_ms - cal_.concurrent_overhead_lo_ms) *
                config_hash01(config, kSaltConcurrent);
  }
  return ttft + itl * (output_tokens - 1);
}

LatencySample ServingSimulator::latency_model(const Config& config, const HardwareProfile& hw,
                                              DispatchMode mode, int in_flight, int output_tokens,
                                              Rng& rng) const {
  LatencySample sample;

  // Stability under load: only near-boundary memory geometry is at risk.
  const double u = config.gpu_memory_utilization;
  if (u > cal_.runtime_fail_util_threshold) {
    const int64_t geometry = static_cast<int64_t>(config.max_num_seqs) * config.max_model_len;
    const double budget = static_cast<double>(kv_token_budget(hw, u));
    if (static_cast<double>(geometry) >= cal_.runtime_fail_geometry_fraction * budget) {
      if (rng.u01() < cal_.runtime_fail_prob) {
        sample.runtime_fail = true;
        return sample;
      }
    }
  }

  double eager_mult = 1.0;
  if (config.enforce_eager) {
    eager_mult = cal_.eager_mult_lo +
                 (cal_.eager_mult_hi - cal_.eager_mult_lo) * config_hash01(config, kSaltEagerBand);
  }
  double itl_eff = cal_.itl_base_ms * eager_mult;
  if (config.enable_prefix_caching) itl_eff *= 1.0 - cal_.prefix_caching_discount;
  if (config.quantization == "fp8") itl_eff *= 1.0 - cal_.fp8_discount;
  itl_eff += cal_.contention_itl_ms * (in_flight - 1);

  sample.ttft_ms = cal_.base_ttft_ms + rng.truncated_normal(cal_.ttft_jitter_sd_ms);
  if (mode == DispatchMode::concurrent) {
    sample.ttft_ms += cal_.concurrent_overhead_lo_ms +
                      (cal_.concurrent_overhead_hi_ms - cal_.concurrent_overhead_lo_ms) *
                          config_hash01(config, kSaltConcurrent);
  }
  sample.ttft_ms = std::max(sample.ttft_ms, 0.001);

  sample.itl_ms.reserve(std::max(output_tokens - 1, 0));
  for (int t = 0; t + 1 < output_tokens; ++t) {
    const double itl = itl_eff + rng.truncated_normal(cal_.itl_jitter_sd_ms);
    sample.itl_ms.push_back(std::max(itl, 0.001));
  }
  return sample;
}

BatchResult ServingSimulator::dispatch_batch(const EngineHandle& handle, const Workload& workload,
                                             Rng& rng) const {
  if (workload.num_requests < 1 || workload.concurrency_cap < 1 || workload.output_tokens_cap < 1 ||
      workload.target_rate_per_s <= 0)
    throw std::invalid_argument("malformed workload");

  const bool concurrent = workload.dispatch_mode == DispatchMode::concurrent;
  const double spacing_ms =
      (concurrent ? cal_.concurrent_pacing_factor : 1.0) * 1000.0 / workload.target_rate_per_s;

  BatchResult batch;
  std::vector<double> completions;
  completions.reserve(workload.num_requests);
  double last_event = 0.0;

  for (int i = 0; i < workload.num_requests; ++i) {
    const double arrival = i * spacing_ms;
    double start = arrival;
    if (concurrent) {
      if (i >= workload.concurrency_cap) {
        // FIFO semaphore: wait until cap-1 slots of earlier work remain.
        std::vector<double> sorted(completions);
        std::sort(sorted.begin(), sorted.end());
        start = std::max(start, sorted[i - workload.concurrency_cap]);
      }
    } else if (i > 0) {
      start = std::max(start, completions.back());
    }

    int in_flight = 1;
    for (double c : completions)
      if (c > start) ++in_flight;

    LatencySample sample = latency_model(handle.config, handle.hw, workload.dispatch_mode,
                                         in_flight, workload.output_tokens_cap, rng);
    if (sample.runtime_fail) {
      RequestOutcome failed;
      failed.error = "runtime_failure";
      batch.requests.push_back(std::move(failed));
      batch.crash = CrashCategory::runtime_failure;
      batch.batch_wall_clock_ms = std::max(last_event, start);
      return batch;
    }

    RequestOutcome out;
    out.ttft_ms = sample.ttft_ms;
    out.itl_ms = std::move(sample.itl_ms);
    out.total_latency_ms = out.ttft_ms;
    for (double itl : out.itl_ms) out.total_latency_ms += itl;
    out.output_tokens = 1 + static_cast<int>(out.itl_ms.size());

    const double completion = start + out.total_latency_ms;
    completions.push_back(completion);
    last_event = std::max(last_event, completion);
    batch.requests.push_back(std::move(out));
  }

  batch.batch_wall_clock_ms = last_event;  // first issue is at t = 0
  return batch;
}

BatchResult run_benchmark(const ServingSimulator& sim, const Config& config,
                          const HardwareProfile& hw, const Workload& workload, Rng& rng) {
  auto handle = sim.start_engine(config, hw);
  if (!handle) {
    BatchResult batch;
    batch.crash = CrashCategory::startup_failure;
    return batch;
  }
  if (!sim.preflight(*handle)) {
    BatchResult batch;
    batch.crash = CrashCategory::preflight_failure;
    return batch;
  }
  return sim.dispatch_batch(*handle, workload, rng);
}

}  // namespace sloguard
