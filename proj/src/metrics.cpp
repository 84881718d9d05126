#include "sloguard/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sloguard {

double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<size_t>(std::ceil(p * static_cast<double>(values.size())));
  return values[std::max<size_t>(rank, 1) - 1];
}

double violation_score(bool crashed, double ttft_p99_ms, double itl_p99_ms, double memory_bytes,
                       double tau_ttft_ms, double tau_itl_ms, double tau_memory_bytes) {
  if (crashed) return kCrashViolationScore;
  return std::max(0.0, ttft_p99_ms / tau_ttft_ms - 1.0) +
         std::max(0.0, itl_p99_ms / tau_itl_ms - 1.0) +
         std::max(0.0, memory_bytes / tau_memory_bytes - 1.0);
}

TrialMetrics evaluate_trial(const BatchResult& batch, const SloThresholds& slo,
                            const Config& config, const HardwareProfile& hw) {
  TrialMetrics m;
  m.crash = batch.crash;
  m.memory_bytes = static_cast<double>(hw.model_footprint_bytes) +
                   static_cast<double>(hw.kv_bytes_per_token) *
                       static_cast<double>(config.max_num_seqs) *
                       static_cast<double>(config.max_model_len);

  if (batch.crash != CrashCategory::healthy) {
    m.feasible = false;
    m.goodput_tokens_per_s = 0.0;
    m.violation_score = kCrashViolationScore;
    return m;
  }
  if (batch.requests.empty())
    throw std::invalid_argument("healthy batch with empty request list");

  const double tau_memory =
      slo.memory_bytes > 0 ? slo.memory_bytes
                           : config.gpu_memory_utilization * static_cast<double>(hw.vram_bytes);

  std::vector<double> ttfts, max_itls, totals;
  double satisfied_tokens = 0.0;
  for (const RequestOutcome& r : batch.requests) {
    ttfts.push_back(r.ttft_ms);
    const double max_itl =
        r.itl_ms.empty() ? 0.0 : *std::max_element(r.itl_ms.begin(), r.itl_ms.end());
    max_itls.push_back(max_itl);
    totals.push_back(r.total_latency_ms);
    if (r.ttft_ms <= slo.ttft_p99_ms && max_itl <= slo.itl_p99_ms)
      satisfied_tokens += static_cast<double>(r.output_tokens);
  }

  m.ttft_p99_ms = nearest_rank_percentile(ttfts, 0.99);
  // p99 over n=5 requests is the max; per-request tail = that request's worst gap.
  m.itl_p99_ms = nearest_rank_percentile(max_itls, 0.99);
  m.avg_latency_ms =
      std::accumulate(totals.begin(), totals.end(), 0.0) / static_cast<double>(totals.size());
  m.goodput_tokens_per_s = satisfied_tokens / (batch.batch_wall_clock_ms / 1000.0);
  m.feasible = *m.ttft_p99_ms <= slo.ttft_p99_ms && *m.itl_p99_ms <= slo.itl_p99_ms &&
               m.memory_bytes <= tau_memory;
  m.violation_score = violation_score(false, *m.ttft_p99_ms, *m.itl_p99_ms, m.memory_bytes,
                                      slo.ttft_p99_ms, slo.itl_p99_ms, tau_memory);
  return m;
}

bool is_fast(const TrialMetrics& metrics) {
  return metrics.feasible && metrics.avg_latency_ms &&
         *metrics.avg_latency_ms < kFastClusterThresholdMs;
}

SeedSummary seed_summary(std::span<const TrialMetrics> trials) {
  SeedSummary s;
  s.budget = static_cast<int>(trials.size());
  for (size_t i = 0; i < trials.size(); ++i) {
    const TrialMetrics& t = trials[i];
    if (t.crash != CrashCategory::healthy) ++s.crash_count;
    if (t.feasible) {
      ++s.feasible_count;
      if (t.avg_latency_ms && (!s.best_latency_ms || *t.avg_latency_ms < *s.best_latency_ms))
        s.best_latency_ms = *t.avg_latency_ms;
    }
    if (is_fast(t)) {
      ++s.fast_count;
      if (!s.first_fast) s.first_fast = static_cast<int>(i) + 1;
    }
  }
  if (s.first_fast && *s.first_fast < s.budget) {
    int later = s.budget - *s.first_fast;
    int later_fast = 0;
    for (size_t i = static_cast<size_t>(*s.first_fast); i < trials.size(); ++i)
      if (is_fast(trials[i])) ++later_fast;
    s.post_hit_consistency = static_cast<double>(later_fast) / static_cast<double>(later);
  }
  return s;
}

}  // namespace sloguard
