#include "sloguard/calibration_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sloguard/metrics.hpp"

namespace sloguard {

namespace {

CalibrationTarget target(std::string name, double measured, double lo, double hi) {
  return {std::move(name), measured, lo, hi, measured >= lo && measured <= hi};
}

Config fast_variant(int seqs, int len, double u, bool prefix, bool fp8) {
  Config c;
  c.enforce_eager = false;
  c.max_num_seqs = seqs;
  c.max_model_len = len;
  c.max_num_batched_tokens = 8192;
  c.gpu_memory_utilization = u;
  c.enable_prefix_caching = prefix;
  c.quantization = fp8 ? "fp8" : "none";
  return c;
}

}  // namespace

Config find_slow_config(const ServingSimulator& sim, double lo_ms, double hi_ms) {
  const SearchSpace& space = default_space();
  for (int si = 0; si < static_cast<int>(space.max_num_seqs_grid.size()); ++si) {
    for (int li = 0; li < static_cast<int>(space.max_model_len_grid.size()); ++li) {
      for (int ui = 0; ui < 40; ++ui) {
        Config c;
        c.enforce_eager = true;
        c.max_num_seqs = space.max_num_seqs_grid[si];
        c.max_model_len = space.max_model_len_grid[li];
        c.max_num_batched_tokens = 8192;
        c.gpu_memory_utilization = 0.55 + 0.008 * ui;
        const double mean =
            sim.expected_request_latency_ms(c, DispatchMode::sequential, 1, 100);
        if (mean >= lo_ms && mean <= hi_ms) return c;
      }
    }
  }
  throw std::runtime_error("no slow config found in the requested latency band");
}

std::vector<CalibrationTarget> run_calibration_suite(const ServingSimulator& sim,
                                                     const HardwareProfile& hw, uint64_t seed) {
  std::vector<CalibrationTarget> out;
  const SearchSpace& space = default_space();
  Rng rng(seed);

  // Fast-regime sequential cluster center: 1000 draws of the plain config.
  {
    Config plain = fast_variant(64, 2048, 0.7, false, false);
    double sum = 0.0;
    for (int i = 0; i < 1000; ++i) {
      LatencySample s = sim.latency_model(plain, hw, DispatchMode::sequential, 1, 100, rng);
      double total = s.ttft_ms;
      for (double itl : s.itl_ms) total += itl;
      sum += total;
    }
    out.push_back(target("fast_sequential_mean_ms", sum / 1000.0, 428.0, 434.0));
  }

  // Per-config mean bands, noise-free.
  std::vector<double> fast_seq, fast_conc;
  double slow_conc_min = 1e18, slow_conc_max = 0.0, fast_mean_acc = 0.0;
  {
    for (int i = 0; i < 60; ++i) {
      Config c = sample_uniform(space, rng);
      c.enforce_eager = false;
      fast_seq.push_back(sim.expected_request_latency_ms(c, DispatchMode::sequential, 1, 100));
      fast_conc.push_back(sim.expected_request_latency_ms(c, DispatchMode::concurrent, 1, 100));
      fast_mean_acc += fast_conc.back();

      Config s = sample_uniform(space, rng);
      s.enforce_eager = true;
      s.enable_chunked_prefill = false;
      const double slow = sim.expected_request_latency_ms(s, DispatchMode::concurrent, 2, 100);
      slow_conc_min = std::min(slow_conc_min, slow);
      slow_conc_max = std::max(slow_conc_max, slow);
    }
    out.push_back(target("fast_concurrent_cluster_mean_ms", fast_mean_acc / 60.0, 460.0, 480.0));
    out.push_back(target("slow_concurrent_band_low_ms", slow_conc_min, 2000.0, 2600.0));
    out.push_back(target("slow_concurrent_band_high_ms", slow_conc_max, 2000.0, 2600.0));

    const auto range = [](const std::vector<double>& v) {
      return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
    };
    out.push_back(
        target("concurrent_extra_dispersion_ms", range(fast_conc) - range(fast_seq), 30.0, 50.0));
  }

  // Harness wall-clock profile for a slow config rated ~2500 ms per request.
  {
    const Config slow = find_slow_config(sim, 2460.0, 2540.0);
    Workload wl;
    const ServingSimulator::EngineHandle handle{slow, hw};

    wl.dispatch_mode = DispatchMode::concurrent;
    Rng conc_rng(seed + 1);
    const BatchResult conc = sim.dispatch_batch(handle, wl, conc_rng);
    out.push_back(target("slow_concurrent_wall_ms", conc.batch_wall_clock_ms, 3800.0, 4400.0));

    wl.dispatch_mode = DispatchMode::sequential;
    Rng seq_rng(seed + 2);
    const BatchResult seq = sim.dispatch_batch(handle, wl, seq_rng);
    out.push_back(target("slow_sequential_wall_ms", seq.batch_wall_clock_ms, 12200.0, 12800.0));
  }

  // Bimodality: enforce_eager alone explains the latency variance.
  {
    Workload wl;  // concurrent default
    SloThresholds slo;
    std::vector<double> lat;
    std::vector<bool> eager;
    for (int i = 0; i < 500; ++i) {
      Config c = repair(space, sample_uniform(space, rng), hw).repaired;
      Rng batch_rng(child_seed(seed, 1000 + i, rng_stream::kSimulate));
      const BatchResult batch = run_benchmark(sim, c, hw, wl, batch_rng);
      const TrialMetrics m = evaluate_trial(batch, slo, c, hw);
      if (!m.avg_latency_ms) continue;
      lat.push_back(*m.avg_latency_ms);
      eager.push_back(c.enforce_eager);
    }
    double mean = 0.0, mean_t = 0.0, mean_f = 0.0;
    int n_t = 0, n_f = 0;
    for (size_t i = 0; i < lat.size(); ++i) {
      mean += lat[i];
      if (eager[i]) {
        mean_t += lat[i];
        ++n_t;
      } else {
        mean_f += lat[i];
        ++n_f;
      }
    }
    mean /= static_cast<double>(lat.size());
    mean_t /= std::max(n_t, 1);
    mean_f /= std::max(n_f, 1);
    double ss_total = 0.0, ss_resid = 0.0;
    for (size_t i = 0; i < lat.size(); ++i) {
      ss_total += (lat[i] - mean) * (lat[i] - mean);
      const double fitted = eager[i] ? mean_t : mean_f;
      ss_resid += (lat[i] - fitted) * (lat[i] - fitted);
    }
    out.push_back(target("bimodality_r2", 1.0 - ss_resid / ss_total, 0.95, 1.0));
  }

  // Guard behavior: zero startup failures once repaired, crashes without it.
  {
    int repaired_failures = 0, raw_failures = 0;
    for (int i = 0; i < 2000; ++i) {
      const Config c = repair(space, sample_uniform(space, rng), hw).repaired;
      if (!sim.start_engine(c, hw)) ++repaired_failures;
    }
    for (int i = 0; i < 1000; ++i) {
      const Config c = sample_uniform(space, rng);
      if (!sim.start_engine(c, hw)) ++raw_failures;
    }
    out.push_back(target("guarded_startup_failures", repaired_failures, 0.0, 0.0));
    out.push_back(target("unguarded_startup_failures", raw_failures, 1.0, 1000.0));
  }

  return out;
}

}  // namespace sloguard
