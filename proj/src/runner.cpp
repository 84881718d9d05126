#include "sloguard/runner.hpp"

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace sloguard {

namespace {

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json opt_to_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> opt_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

nlohmann::json TrialRecord::to_json() const {
  nlohmann::json requests_json = nlohmann::json::array();
  for (const RequestOutcome& r : requests) {
    requests_json.push_back({{"ttft_ms", r.ttft_ms},
                             {"itl_ms", r.itl_ms},
                             {"total_latency_ms", r.total_latency_ms},
                             {"satisfied_slo", r.satisfied_slo},
                             {"output_tokens", r.output_tokens},
                             {"error", r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr)}});
  }
  return nlohmann::json{{"optimizer", optimizer},
                        {"seed", seed},
                        {"trial_index", trial_index},
                        {"phase", to_string(phase)},
                        {"raw_config", config_to_map(raw_config)},
                        {"repaired_config", config_to_map(repaired_config)},
                        {"repair_actions", repair_actions},
                        {"crash_category", to_string(crash_category)},
                        {"requests", requests_json},
                        {"batch_wall_clock_ms", batch_wall_clock_ms},
                        {"feasible", metrics.feasible},
                        {"ttft_p99_ms", opt_to_json(metrics.ttft_p99_ms)},
                        {"itl_p99_ms", opt_to_json(metrics.itl_p99_ms)},
                        {"memory_bytes", metrics.memory_bytes},
                        {"goodput_tokens_per_s", metrics.goodput_tokens_per_s},
                        {"violation_score", metrics.violation_score},
                        {"avg_latency_ms", opt_to_json(metrics.avg_latency_ms)},
                        {"timestamp", timestamp}};
}

TrialRecord TrialRecord::from_json(const nlohmann::json& j) {
  TrialRecord r;
  r.optimizer = j.at("optimizer").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.trial_index = j.at("trial_index").get<int>();
  r.phase = phase_from_string(j.at("phase").get<std::string>());
  r.raw_config = config_from_map(j.at("raw_config"));
  r.repaired_config = config_from_map(j.at("repaired_config"));
  r.repair_actions = j.at("repair_actions").get<std::vector<std::string>>();
  r.crash_category = crash_category_from_string(j.at("crash_category").get<std::string>());
  for (const auto& rj : j.at("requests")) {
    RequestOutcome out;
    out.ttft_ms = rj.at("ttft_ms").get<double>();
    out.itl_ms = rj.at("itl_ms").get<std::vector<double>>();
    out.total_latency_ms = rj.at("total_latency_ms").get<double>();
    out.satisfied_slo = rj.at("satisfied_slo").get<bool>();
    out.output_tokens = rj.at("output_tokens").get<int>();
    if (!rj.at("error").is_null()) out.error = rj.at("error").get<std::string>();
    r.requests.push_back(std::move(out));
  }
  r.batch_wall_clock_ms = j.at("batch_wall_clock_ms").get<double>();
  r.metrics.feasible = j.at("feasible").get<bool>();
  r.metrics.ttft_p99_ms = opt_from_json(j.at("ttft_p99_ms"));
  r.metrics.itl_p99_ms = opt_from_json(j.at("itl_p99_ms"));
  r.metrics.memory_bytes = j.at("memory_bytes").get<double>();
  r.metrics.goodput_tokens_per_s = j.at("goodput_tokens_per_s").get<double>();
  r.metrics.violation_score = j.at("violation_score").get<double>();
  r.metrics.avg_latency_ms = opt_from_json(j.at("avg_latency_ms"));
  r.metrics.crash = r.crash_category;
  r.timestamp = j.value("timestamp", "");
  return r;
}

Observation TrialRecord::to_observation() const {
  Observation obs;
  obs.config = repaired_config;
  obs.crash = crash_category;
  obs.violation_score = metrics.violation_score;
  obs.goodput_tokens_per_s = metrics.goodput_tokens_per_s;
  obs.avg_latency_ms = metrics.avg_latency_ms;
  obs.trial_index = trial_index;
  obs.phase = phase;
  return obs;
}

TrialLogWriter::TrialLogWriter(const std::string& path) : path_(path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  file_ = std::fopen(path.c_str(), "ab");
  if (!file_) throw std::runtime_error("cannot open trial log for append: " + path);
}

TrialLogWriter::~TrialLogWriter() {
  if (file_) std::fclose(file_);
}

void TrialLogWriter::append(const TrialRecord& record) {
  const std::string line = record.to_json().dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0 ||
      ::fsync(fileno(file_)) != 0)
    throw std::runtime_error("failed to persist trial record to " + path_);
}

std::vector<TrialRecord> read_trial_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trial log: " + path);
  std::vector<TrialRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(TrialRecord::from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed trial record: " + e.what());
    }
  }
  return records;
}

std::string study_log_name(const std::string& optimizer_name, uint64_t seed) {
  return optimizer_name + "_seed" + std::to_string(seed) + ".jsonl";
}

TrialRecord run_trial(const StudySpec& spec, Optimizer& optimizer, int trial_index,
                      TrialLogWriter* writer) {
  Rng propose_rng(child_seed(spec.seed, trial_index, rng_stream::kPropose));
  Rng simulate_rng(child_seed(spec.seed, trial_index, rng_stream::kSimulate));
  Rng observe_rng(child_seed(spec.seed, trial_index, rng_stream::kObserve));

  const Proposal proposal = optimizer.propose(trial_index, spec.budget, propose_rng);
  const RepairReport rep = repair(default_space(), proposal.config, spec.hw);

  const ServingSimulator sim(spec.calibration);
  BatchResult batch = run_benchmark(sim, rep.repaired, spec.hw, spec.workload, simulate_rng);

  TrialRecord record;
  record.optimizer = optimizer.name();
  record.seed = spec.seed;
  record.trial_index = trial_index;
  record.phase = proposal.phase;
  record.raw_config = proposal.config;
  record.repaired_config = rep.repaired;
  record.repair_actions = rep.actions;
  record.crash_category = batch.crash;
  record.metrics = evaluate_trial(batch, spec.slo, rep.repaired, spec.hw);
  // Stamp each request with its own SLO verdict for the persisted record.
  for (RequestOutcome& r : batch.requests) {
    const double max_itl = r.itl_ms.empty() ? 0.0 : *std::max_element(r.itl_ms.begin(), r.itl_ms.end());
    r.satisfied_slo = !r.error && r.ttft_ms <= spec.slo.ttft_p99_ms && max_itl <= spec.slo.itl_p99_ms;
  }
  record.requests = std::move(batch.requests);
  record.batch_wall_clock_ms = batch.batch_wall_clock_ms;
  record.timestamp = iso8601_now();

  if (writer) writer->append(record);  // persisted before the optimizer sees it

  optimizer.observe(record.to_observation(), observe_rng);
  return record;
}

void resume_replay(const StudySpec& spec, std::span<const TrialRecord> persisted,
                   Optimizer& optimizer) {
  for (size_t i = 0; i < persisted.size(); ++i) {
    const TrialRecord& r = persisted[i];
    if (r.optimizer != optimizer.name() || r.seed != spec.seed)
      throw std::runtime_error("refusing to resume: record " + std::to_string(i + 1) +
                               " belongs to study " + r.optimizer + "/seed" +
                               std::to_string(r.seed));
    if (r.trial_index != static_cast<int>(i) + 1)
      throw std::runtime_error("refusing to resume: trial log has a gap at index " +
                               std::to_string(i + 1));
    // Proposal-side state (including the handoff flag) is re-derived at the
    // next propose; observe-side draws replay their original streams.
    Rng observe_rng(child_seed(spec.seed, r.trial_index, rng_stream::kObserve));
    optimizer.observe(r.to_observation(), observe_rng);
  }
}

std::vector<TrialRecord> run_study(const StudySpec& spec) {
  auto optimizer = make_optimizer(spec.optimizer_name, default_space(), spec.params);

  std::vector<TrialRecord> records;
  if (!spec.output_path.empty() && std::filesystem::exists(spec.output_path))
    records = read_trial_log(spec.output_path);
  if (static_cast<int>(records.size()) > spec.budget)
    throw std::runtime_error("trial log " + spec.output_path + " exceeds the study budget");
  resume_replay(spec, records, *optimizer);

  std::unique_ptr<TrialLogWriter> writer;
  if (!spec.output_path.empty()) writer = std::make_unique<TrialLogWriter>(spec.output_path);

  for (int t = static_cast<int>(records.size()) + 1; t <= spec.budget; ++t)
    records.push_back(run_trial(spec, *optimizer, t, writer.get()));
  return records;
}

SeedSummary summarize_study(std::span<const TrialRecord> records) {
  std::vector<TrialMetrics> trials;
  trials.reserve(records.size());
  for (const TrialRecord& r : records) trials.push_back(r.metrics);
  SeedSummary s = seed_summary(trials);
  if (!records.empty()) {
    s.optimizer = records.front().optimizer;
    s.seed = records.front().seed;
  }
  return s;
}

bool MultiseedOutcome::all_ok() const {
  for (const StudyStatus& s : studies)
    if (!s.error.empty()) return false;
  return true;
}

MultiseedOutcome run_multiseed(const StudySpec& base, const std::vector<std::string>& optimizers,
                               const std::vector<uint64_t>& seeds,
                               const std::filesystem::path& output_dir, int jobs) {
  std::filesystem::create_directories(output_dir);

  MultiseedOutcome outcome;
  std::mutex outcome_mutex;

  // One seed = one sequential unit: its studies alternate per trial so
  // neither optimizer leads the other by more than one executed trial.
  auto run_seed = [&](uint64_t seed) {
    struct Active {
      StudySpec spec;
      std::unique_ptr<Optimizer> optimizer;
      std::unique_ptr<TrialLogWriter> writer;
      int done = 0;
      int preexisting = 0;
      std::string error;
    };
    std::vector<Active> active;
    for (const std::string& name : optimizers) {
      Active a;
      a.spec = base;
      a.spec.optimizer_name = name;
      a.spec.seed = seed;
      a.spec.output_path = (output_dir / study_log_name(name, seed)).string();
      try {
        a.optimizer = make_optimizer(name, default_space(), a.spec.params);
        std::vector<TrialRecord> persisted;
        if (std::filesystem::exists(a.spec.output_path))
          persisted = read_trial_log(a.spec.output_path);
        if (static_cast<int>(persisted.size()) > a.spec.budget)
          throw std::runtime_error("trial log exceeds budget: " + a.spec.output_path);
        resume_replay(a.spec, persisted, *a.optimizer);
        a.done = a.preexisting = static_cast<int>(persisted.size());
        a.writer = std::make_unique<TrialLogWriter>(a.spec.output_path);
      } catch (const std::exception& e) {
        a.error = e.what();
      }
      active.push_back(std::move(a));
    }

    for (int t = 1; t <= base.budget; ++t) {
      for (Active& a : active) {
        if (!a.error.empty() || a.done >= t) continue;
        try {
          run_trial(a.spec, *a.optimizer, t, a.writer.get());
          a.done = t;
        } catch (const std::exception& e) {
          a.error = e.what();
        }
      }
    }

    std::lock_guard<std::mutex> lock(outcome_mutex);
    for (Active& a : active) {
      MultiseedOutcome::StudyStatus status;
      status.optimizer = a.spec.optimizer_name;
      status.seed = seed;
      status.records = a.done;
      status.new_records = a.done - a.preexisting;
      status.completed = a.error.empty() && a.done == base.budget;
      status.error = a.error;
      outcome.studies.push_back(std::move(status));
    }
  };

  if (jobs <= 1) {
    for (uint64_t seed : seeds) run_seed(seed);
  } else {
    std::vector<std::thread> pool;
    std::mutex next_mutex;
    size_t next = 0;
    const int workers = std::min<int>(jobs, static_cast<int>(seeds.size()));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          uint64_t seed;
          {
            std::lock_guard<std::mutex> lock(next_mutex);
            if (next >= seeds.size()) return;
            seed = seeds[next++];
          }
          run_seed(seed);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }
  return outcome;
}

}  // namespace sloguard
