#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "sloguard/calibration_check.hpp"
#include "sloguard/runner.hpp"
#include "sloguard/stats.hpp"

namespace py = pybind11;
using namespace sloguard;

namespace {

py::dict config_to_dict(const Config& c) {
  py::dict d;
  d["quantization"] = c.quantization;
  d["max_num_seqs"] = c.max_num_seqs;
  d["max_num_batched_tokens"] = c.max_num_batched_tokens;
  d["gpu_memory_utilization"] = c.gpu_memory_utilization;
  d["max_model_len"] = c.max_model_len;
  d["enforce_eager"] = c.enforce_eager;
  d["enable_chunked_prefill"] = c.enable_chunked_prefill;
  d["enable_prefix_caching"] = c.enable_prefix_caching;
  return d;
}

Config config_from_dict(const py::dict& d) {
  Config c;
  c.quantization = py::cast<std::string>(d["quantization"]);
  c.max_num_seqs = py::cast<int>(d["max_num_seqs"]);
  c.max_num_batched_tokens = py::cast<int>(d["max_num_batched_tokens"]);
  c.gpu_memory_utilization = py::cast<double>(d["gpu_memory_utilization"]);
  c.max_model_len = py::cast<int>(d["max_model_len"]);
  c.enforce_eager = py::cast<bool>(d["enforce_eager"]);
  c.enable_chunked_prefill = py::cast<bool>(d["enable_chunked_prefill"]);
  c.enable_prefix_caching = py::cast<bool>(d["enable_prefix_caching"]);
  return c;
}

HardwareProfile profile_for(const std::string& model, int64_t vram_bytes) {
  return ModelRegistry::builtin().lookup(model, vram_bytes).profile;
}

Workload workload_for(const std::string& harness, int num_requests, int output_tokens,
                      double target_rate, int concurrency_cap) {
  Workload wl;
  wl.dispatch_mode = harness == "sequential" ? DispatchMode::sequential : DispatchMode::concurrent;
  wl.num_requests = num_requests;
  wl.output_tokens_cap = output_tokens;
  wl.target_rate_per_s = target_rate;
  wl.concurrency_cap = concurrency_cap;
  return wl;
}

py::dict record_to_dict(const TrialRecord& r) {
  // Route through the frozen JSONL schema so both surfaces agree.
  py::module_ json = py::module_::import("json");
  return json.attr("loads")(r.to_json().dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Crash-aware two-phase serving-config autotuner against a calibrated simulator";

  m.def(
      "sample_uniform",
      [](uint64_t seed) {
        Rng rng(seed);
        return config_to_dict(sample_uniform(default_space(), rng));
      },
      py::arg("seed"));

  m.def(
      "neighbor",
      [](const py::dict& config, double structural_prob, uint64_t seed) {
        Rng rng(seed);
        return config_to_dict(
            neighbor(default_space(), config_from_dict(config), structural_prob, rng));
      },
      py::arg("config"), py::arg("structural_prob"), py::arg("seed"));

  m.def("structural_prob_schedule", &structural_prob_schedule, py::arg("trial_index"),
        py::arg("budget"));

  m.def(
      "signature_key",
      [](const py::dict& config) {
        return signature(default_space(), config_from_dict(config)).key();
      },
      py::arg("config"));

  m.def(
      "kv_token_budget",
      [](int64_t vram_bytes, int64_t model_footprint_bytes, int64_t kv_bytes_per_token,
         double safety_margin, double gpu_memory_utilization) {
        HardwareProfile hw;
        hw.vram_bytes = vram_bytes;
        hw.model_footprint_bytes = model_footprint_bytes;
        hw.kv_bytes_per_token = kv_bytes_per_token;
        hw.safety_margin = safety_margin;
        return kv_token_budget(hw, gpu_memory_utilization);
      },
      py::arg("vram_bytes"), py::arg("model_footprint_bytes"), py::arg("kv_bytes_per_token"),
      py::arg("safety_margin"), py::arg("gpu_memory_utilization"));

  m.def(
      "repair",
      [](const py::dict& config, const std::string& model, int64_t vram_bytes) {
        const RepairReport rep =
            repair(default_space(), config_from_dict(config), profile_for(model, vram_bytes));
        py::dict out;
        out["repaired"] = config_to_dict(rep.repaired);
        out["actions"] = rep.actions;
        out["guard_unsatisfiable"] = rep.guard_unsatisfiable();
        return out;
      },
      py::arg("config"), py::arg("model") = "qwen2-1.5b", py::arg("vram_bytes") = (40LL << 30));

  m.def(
      "run_benchmark",
      [](const py::dict& config, uint64_t seed, const std::string& harness,
         const std::string& model, int64_t vram_bytes, int num_requests, int output_tokens,
         double target_rate, int concurrency_cap) {
        const HardwareProfile hw = profile_for(model, vram_bytes);
        const Workload wl =
            workload_for(harness, num_requests, output_tokens, target_rate, concurrency_cap);
        const ServingSimulator sim;
        Rng rng(seed);
        const Config c = config_from_dict(config);
        const BatchResult batch = run_benchmark(sim, c, hw, wl, rng);
        const TrialMetrics metrics = evaluate_trial(batch, SloThresholds{}, c, hw);
        py::dict out;
        out["crash_category"] = to_string(batch.crash);
        out["batch_wall_clock_ms"] = batch.batch_wall_clock_ms;
        out["num_requests"] = batch.requests.size();
        out["feasible"] = metrics.feasible;
        out["goodput_tokens_per_s"] = metrics.goodput_tokens_per_s;
        out["violation_score"] = metrics.violation_score;
        out["avg_latency_ms"] =
            metrics.avg_latency_ms ? py::object(py::float_(*metrics.avg_latency_ms)) : py::none();
        return out;
      },
      py::arg("config"), py::arg("seed"), py::arg("harness") = "concurrent",
      py::arg("model") = "qwen2-1.5b", py::arg("vram_bytes") = (40LL << 30),
      py::arg("num_requests") = 5, py::arg("output_tokens") = 100, py::arg("target_rate") = 1.0,
      py::arg("concurrency_cap") = 5);

  m.def(
      "run_study",
      [](const std::string& optimizer, uint64_t seed, int budget, const std::string& output_path,
         const std::string& harness, const std::string& model, int64_t vram_bytes) {
        StudySpec spec;
        spec.optimizer_name = optimizer;
        spec.seed = seed;
        spec.budget = budget;
        spec.output_path = output_path;
        spec.workload.dispatch_mode =
            harness == "sequential" ? DispatchMode::sequential : DispatchMode::concurrent;
        spec.hw = profile_for(model, vram_bytes);
        const auto records = run_study(spec);
        py::list out;
        for (const TrialRecord& r : records) out.append(record_to_dict(r));
        return out;
      },
      py::arg("optimizer"), py::arg("seed"), py::arg("budget") = 15, py::arg("output_path") = "",
      py::arg("harness") = "concurrent", py::arg("model") = "qwen2-1.5b",
      py::arg("vram_bytes") = (40LL << 30));

  m.def(
      "mann_whitney",
      [](const std::vector<double>& x, const std::vector<double>& y,
         const std::string& alternative, bool exact) {
        const Alternative alt = alternative == "two_sided" ? Alternative::two_sided
                                                           : Alternative::one_sided_greater;
        const MannWhitneyResult r = mann_whitney(
            x, y, alt, exact ? TestMethod::exact_permutation : TestMethod::normal_approx);
        return py::make_tuple(r.u_statistic, r.p);
      },
      py::arg("x"), py::arg("y"), py::arg("alternative") = "one_sided_greater",
      py::arg("exact") = false);

  m.def(
      "holm_bonferroni",
      [](const std::vector<double>& ps, bool monotone) { return holm_bonferroni(ps, monotone); },
      py::arg("p_values"), py::arg("monotone") = true);

  m.def(
      "sample_std",
      [](const std::vector<double>& values) -> py::object {
        const auto s = sample_std(values);
        return s ? py::object(py::float_(*s)) : py::none();
      },
      py::arg("values"));

  m.def(
      "seed_summary",
      [](const std::vector<bool>& feasible, const std::vector<py::object>& avg_latency_ms) {
        if (feasible.size() != avg_latency_ms.size())
          throw std::invalid_argument("feasible and avg_latency_ms must align");
        std::vector<TrialMetrics> trials(feasible.size());
        for (size_t i = 0; i < feasible.size(); ++i) {
          trials[i].feasible = feasible[i];
          if (!avg_latency_ms[i].is_none())
            trials[i].avg_latency_ms = py::cast<double>(avg_latency_ms[i]);
          trials[i].crash = CrashCategory::healthy;
        }
        const SeedSummary s = seed_summary(trials);
        py::dict out;
        out["fast_count"] = s.fast_count;
        out["first_fast"] = s.first_fast ? py::object(py::int_(*s.first_fast)) : py::none();
        out["post_hit_consistency"] =
            s.post_hit_consistency ? py::object(py::float_(*s.post_hit_consistency)) : py::none();
        out["best_latency_ms"] =
            s.best_latency_ms ? py::object(py::float_(*s.best_latency_ms)) : py::none();
        return out;
      },
      py::arg("feasible"), py::arg("avg_latency_ms"));

  m.def(
      "analyze_logs",
      [](const std::string& input_dir, const std::string& emit) {
        namespace fs = std::filesystem;
        std::vector<SeedSummary> summaries;
        for (const auto& entry : fs::directory_iterator(input_dir)) {
          if (entry.path().extension() != ".jsonl") continue;
          const auto records = read_trial_log(entry.path().string());
          if (!records.empty()) summaries.push_back(summarize_study(records));
        }
        if (summaries.empty()) throw std::runtime_error("no studies found in " + input_dir);
        const StatsReport report = build_report(summaries);
        return emit == "csv" ? render_report_csv(report) : render_report_text(report);
      },
      py::arg("input_dir"), py::arg("emit") = "text");

  m.def("calibration_check", [] {
    const ServingSimulator sim;
    py::list out;
    for (const CalibrationTarget& t : run_calibration_suite(sim, HardwareProfile{})) {
      py::dict d;
      d["name"] = t.name;
      d["measured"] = t.measured;
      d["lo"] = t.lo;
      d["hi"] = t.hi;
      d["pass"] = t.pass;
      out.append(d);
    }
    return out;
  });
}
