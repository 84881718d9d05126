#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sloguard/calibration_check.hpp"
#include "sloguard/runner.hpp"
#include "sloguard/stats.hpp"

namespace fs = std::filesystem;
using namespace sloguard;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitStudy = 3;

struct StudyOptions {
  std::vector<uint64_t> seeds = {42, 142, 242, 342, 442};
  std::vector<std::string> optimizers = {"random", "tba-tpe"};
  int budget = 15;
  std::string harness = "concurrent";
  std::string model = "qwen2-1.5b";
  int64_t vram_bytes = 40LL << 30;
  std::string registry_path;
  std::string calibration_path;
  int jobs = 1;
  Workload workload;
  SloThresholds slo;
  OptimizerParams params;
};

void add_study_options(CLI::App* cmd, StudyOptions& o) {
  cmd->add_option("--budget", o.budget, "Trials per study")->check(CLI::PositiveNumber);
  cmd->add_option("--harness", o.harness, "Dispatch mode: sequential | concurrent")
      ->check(CLI::IsMember({"sequential", "concurrent"}));
  cmd->add_option("--model", o.model, "Model id for the hardware registry");
  cmd->add_option("--vram-bytes", o.vram_bytes, "Detected GPU VRAM in bytes");
  cmd->add_option("--registry", o.registry_path, "Model registry file (overrides the built-in table)");
  cmd->add_option("--calibration", o.calibration_path, "Simulator calibration table");
  cmd->add_option("--requests", o.workload.num_requests, "Requests per trial");
  cmd->add_option("--output-tokens", o.workload.output_tokens_cap, "Output token cap per request");
  cmd->add_option("--target-rate", o.workload.target_rate_per_s, "Nominal request rate (req/s)");
  cmd->add_option("--concurrency-cap", o.workload.concurrency_cap, "In-flight cap (concurrent mode)");
  cmd->add_option("--ttft-slo-ms", o.slo.ttft_p99_ms, "p99 TTFT threshold (ms)");
  cmd->add_option("--itl-slo-ms", o.slo.itl_p99_ms, "p99 ITL threshold (ms)");
  cmd->add_option("--opt-n-init", o.params.n_init, "Uniform warmup trials");
  cmd->add_option("--opt-n-f-min", o.params.n_f_min, "Handoff: min feasible trials");
  cmd->add_option("--opt-n-b-min", o.params.n_b_min, "Handoff: min crash/violation trials");
  cmd->add_option("--opt-gamma", o.params.gamma, "TPE good-set quantile");
  cmd->add_option("--opt-candidates", o.params.candidate_count, "TPE candidates per proposal");
  cmd->add_option("--opt-temp-decay", o.params.temp_decay, "Annealing temperature decay");
}

StudySpec make_spec(const StudyOptions& o) {
  StudySpec spec;
  spec.budget = o.budget;
  spec.workload = o.workload;
  spec.workload.dispatch_mode =
      o.harness == "sequential" ? DispatchMode::sequential : DispatchMode::concurrent;
  spec.slo = o.slo;
  spec.params = o.params;
  const ModelRegistry registry = o.registry_path.empty()
                                     ? ModelRegistry::builtin()
                                     : ModelRegistry::from_file(o.registry_path);
  const RegistryResult lookup = registry.lookup(o.model, o.vram_bytes);
  if (lookup.fallback)
    std::cerr << "warning: model '" << o.model << "' resolved to the fallback profile"
              << (lookup.zero_vram ? " (zero VRAM detected)" : "") << "\n";
  spec.hw = lookup.profile;
  if (!o.calibration_path.empty()) spec.calibration = SimCalibration::from_file(o.calibration_path);
  return spec;
}

int cmd_run_multiseed(const StudyOptions& o, const std::string& output_dir) {
  StudySpec base = make_spec(o);
  const MultiseedOutcome outcome =
      run_multiseed(base, o.optimizers, o.seeds, fs::path(output_dir), o.jobs);
  int total_new = 0;
  for (const auto& s : outcome.studies) {
    std::cout << s.optimizer << " seed " << s.seed << ": " << s.records << "/" << o.budget
              << " trials (" << s.new_records << " new)"
              << (s.error.empty() ? "" : " ERROR: " + s.error) << "\n";
    total_new += s.new_records;
  }
  std::cout << "wrote " << total_new << " new records to " << output_dir << "\n";
  return outcome.all_ok() ? kExitOk : kExitStudy;
}

int cmd_run_study(const StudyOptions& o, const std::string& optimizer, uint64_t seed,
                  const std::string& output) {
  StudySpec spec = make_spec(o);
  spec.optimizer_name = optimizer;
  spec.seed = seed;
  spec.output_path = output;
  const auto records = run_study(spec);
  const SeedSummary s = summarize_study(records);
  std::cout << optimizer << " seed " << seed << ": " << records.size() << " trials, fast "
            << s.fast_count << "/" << s.budget;
  if (s.best_latency_ms) std::cout << ", best latency " << *s.best_latency_ms << " ms";
  std::cout << "\n";
  return kExitOk;
}

int cmd_analyze(const std::string& input_dir, const std::string& summaries_csv,
                const std::string& emit) {
  std::vector<SeedSummary> summaries;
  if (!summaries_csv.empty()) {
    summaries = summaries_from_csv(summaries_csv);
  } else {
    std::vector<fs::path> logs;
    if (!fs::is_directory(input_dir)) {
      std::cerr << "error: not a directory: " << input_dir << "\n";
      return kExitData;
    }
    for (const auto& entry : fs::directory_iterator(input_dir))
      if (entry.path().extension() == ".jsonl") logs.push_back(entry.path());
    if (logs.empty()) {
      std::cerr << "error: no studies found in " << input_dir << "\n";
      return kExitData;
    }
    std::sort(logs.begin(), logs.end());
    std::map<std::string, std::set<uint64_t>> seeds_by_optimizer;
    for (const fs::path& log : logs) {
      const auto records = read_trial_log(log.string());
      if (records.empty()) {
        std::cerr << "warning: empty log skipped: " << log << "\n";
        continue;
      }
      summaries.push_back(summarize_study(records));
      seeds_by_optimizer[summaries.back().optimizer].insert(summaries.back().seed);
    }
    // Missing (optimizer, seed) pairs are named, never silently dropped.
    std::set<uint64_t> all_seeds;
    for (const auto& [_, seeds] : seeds_by_optimizer) all_seeds.insert(seeds.begin(), seeds.end());
    for (const auto& [opt, seeds] : seeds_by_optimizer)
      for (uint64_t seed : all_seeds)
        if (!seeds.count(seed)) std::cerr << "missing study: " << opt << " seed " << seed << "\n";
  }

  const StatsReport report = build_report(summaries);
  std::cout << (emit == "csv" ? render_report_csv(report) : render_report_text(report));
  return kExitOk;
}

int cmd_show_trial(const std::string& file, int index) {
  const auto records = read_trial_log(file);
  if (index < 1 || index > static_cast<int>(records.size())) {
    std::cerr << "error: trial index " << index << " out of range; " << file << " has "
              << records.size() << " records (indices are 1-based)\n";
    return kExitData;
  }
  const TrialRecord& r = records[static_cast<size_t>(index) - 1];
  std::cout << "study:      " << r.optimizer << " seed " << r.seed << ", trial " << r.trial_index
            << " [" << to_string(r.phase) << "]\n";
  std::cout << "crash:      " << to_string(r.crash_category) << "\n";
  std::cout << "raw config:      " << config_to_map(r.raw_config).dump() << "\n";
  std::cout << "repaired config: " << config_to_map(r.repaired_config).dump() << "\n";
  std::cout << "repair actions:  ";
  if (r.repair_actions.empty()) std::cout << "(none)";
  for (const auto& a : r.repair_actions) std::cout << a << " ";
  std::cout << "\n";
  if (r.crash_category == CrashCategory::healthy) {
    std::cout << "wall-clock: " << r.batch_wall_clock_ms << " ms\n";
    std::cout << "metrics:    feasible=" << (r.metrics.feasible ? "true" : "false")
              << " ttft_p99=" << r.metrics.ttft_p99_ms.value_or(0) << " ms"
              << " itl_p99=" << r.metrics.itl_p99_ms.value_or(0) << " ms"
              << " goodput=" << r.metrics.goodput_tokens_per_s << " tok/s"
              << " avg_latency=" << r.metrics.avg_latency_ms.value_or(0) << " ms"
              << " violation=" << r.metrics.violation_score << "\n";
    std::cout << "requests:\n";
    for (size_t i = 0; i < r.requests.size(); ++i) {
      const RequestOutcome& q = r.requests[i];
      std::cout << "  #" << i + 1 << " ttft=" << q.ttft_ms << " ms total=" << q.total_latency_ms
                << " ms tokens=" << q.output_tokens
                << " slo=" << (q.satisfied_slo ? "ok" : "violated") << "\n";
    }
  } else {
    std::cout << "metrics:    (empty - crashed trial, goodput 0, violation "
              << r.metrics.violation_score << ")\n";
  }
  return kExitOk;
}

int cmd_calibration_check(const StudyOptions& o) {
  StudySpec spec = make_spec(o);
  const ServingSimulator sim(spec.calibration);
  const auto targets = run_calibration_suite(sim, spec.hw);
  bool all_pass = true;
  for (const CalibrationTarget& t : targets) {
    std::printf("[%s] %-34s measured %12.3f  bounds [%.3f, %.3f]\n", t.pass ? "PASS" : "FAIL",
                t.name.c_str(), t.measured, t.lo, t.hi);
    all_pass = all_pass && t.pass;
  }
  std::cout << (all_pass ? "all calibration targets pass\n" : "calibration target(s) failed\n");
  return all_pass ? kExitOk : kExitStudy;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crash-aware two-phase serving-config autotuner and experiment harness"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read flags from an INI file (command line overrides)");

  StudyOptions opts;

  auto* multiseed = app.add_subcommand("run-multiseed", "Run the (optimizer x seed) study matrix");
  std::string output_dir;
  multiseed->add_option("--output-dir", output_dir, "Directory for trial logs")->required();
  multiseed->add_option("--seeds", opts.seeds, "Study seeds");
  multiseed->add_option("--optimizers", opts.optimizers, "Optimizer names");
  multiseed->add_option("--jobs", opts.jobs, "Parallel seed groups")->check(CLI::PositiveNumber);
  add_study_options(multiseed, opts);

  auto* study = app.add_subcommand("run-study", "Run one (optimizer, seed) study");
  std::string study_optimizer = "tba-tpe", study_output;
  uint64_t study_seed = 42;
  study->add_option("--optimizer", study_optimizer, "Optimizer name");
  study->add_option("--seed", study_seed, "Study seed");
  study->add_option("--output", study_output, "Trial log path (resumes if present)")->required();
  add_study_options(study, opts);

  auto* analyze = app.add_subcommand("analyze", "Cross-seed statistics from trial logs");
  std::string input_dir, summaries_csv, emit = "text";
  auto* dir_opt = analyze->add_option("--input-dir", input_dir, "Directory of .jsonl trial logs");
  auto* csv_opt = analyze->add_option("--summaries", summaries_csv, "CSV of per-seed summaries");
  dir_opt->excludes(csv_opt);
  analyze->add_option("--emit", emit, "Output format")->check(CLI::IsMember({"text", "csv"}));

  auto* show = app.add_subcommand("show-trial", "Pretty-print one trial record");
  std::string show_file;
  int show_index = 1;
  show->add_option("--file", show_file, "Trial log path")->required();
  show->add_option("--index", show_index, "1-based trial index")->required();

  auto* calcheck = app.add_subcommand("calibration-check", "Validate simulator calibration targets");
  add_study_options(calcheck, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (multiseed->parsed()) return cmd_run_multiseed(opts, output_dir);
    if (study->parsed()) return cmd_run_study(opts, study_optimizer, study_seed, study_output);
    if (analyze->parsed()) {
      if (input_dir.empty() && summaries_csv.empty()) {
        std::cerr << "error: analyze requires --input-dir or --summaries\n";
        return kExitUsage;
      }
      return cmd_analyze(input_dir, summaries_csv, emit);
    }
    if (show->parsed()) return cmd_show_trial(show_file, show_index);
    if (calcheck->parsed()) return cmd_calibration_check(opts);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string what = e.what();
    return what.find("malformed") != std::string::npos || what.find("cannot open") != std::string::npos
               ? kExitData
               : kExitStudy;
  }
  return kExitUsage;
}
