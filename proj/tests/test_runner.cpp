#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sloguard/runner.hpp"

using namespace sloguard;
namespace fs = std::filesystem;

namespace {

StudySpec spec_for(const std::string& optimizer, uint64_t seed, int budget = 15,
                   const std::string& output = "") {
  StudySpec spec;
  spec.optimizer_name = optimizer;
  spec.seed = seed;
  spec.budget = budget;
  spec.output_path = output;
  return spec;
}

std::string dump_without_timestamp(const TrialRecord& r) {
  nlohmann::json j = r.to_json();
  j.erase("timestamp");
  return j.dump();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("two runs of the same spec produce identical record streams") {
  for (const char* optimizer : {"random", "tba-tpe"}) {
    const auto a = run_study(spec_for(optimizer, 42));
    const auto b = run_study(spec_for(optimizer, 42));
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
      CHECK(dump_without_timestamp(a[i]) == dump_without_timestamp(b[i]));
  }
}

TEST_CASE("budget 1 yields a single explore record") {
  const auto records = run_study(spec_for("tba-tpe", 7, 1));
  REQUIRE(records.size() == 1);
  CHECK(records[0].trial_index == 1);
  CHECK(records[0].phase == Phase::explore);
}

TEST_CASE("records carry the full healthy-path payload") {
  const auto records = run_study(spec_for("tba-tpe", 42, 15));
  for (const TrialRecord& r : records) {
    CHECK(r.crash_category == CrashCategory::healthy);
    CHECK(r.requests.size() == 5);
    for (const RequestOutcome& q : r.requests) {
      CHECK(q.output_tokens == 100);
      CHECK(q.itl_ms.size() == 99);
    }
    CHECK(r.batch_wall_clock_ms > 0);
    CHECK(r.metrics.feasible);
    // The observation the optimizer saw is exactly the persisted metrics.
    const Observation obs = r.to_observation();
    CHECK(obs.goodput_tokens_per_s == r.metrics.goodput_tokens_per_s);
    CHECK(obs.violation_score == r.metrics.violation_score);
    CHECK(obs.config == r.repaired_config);
  }
}

TEST_CASE("trial log round-trips through disk") {
  const fs::path dir = fresh_dir("sloguard_log_roundtrip");
  const std::string path = (dir / "tba-tpe_seed42.jsonl").string();
  const auto written = run_study(spec_for("tba-tpe", 42, 15, path));
  const auto loaded = read_trial_log(path);
  REQUIRE(loaded.size() == written.size());
  for (size_t i = 0; i < loaded.size(); ++i)
    CHECK(dump_without_timestamp(loaded[i]) == dump_without_timestamp(written[i]));
}

TEST_CASE("rerunning a complete study appends nothing") {
  const fs::path dir = fresh_dir("sloguard_complete");
  const std::string path = (dir / "random_seed7.jsonl").string();
  run_study(spec_for("random", 7, 10, path));
  const auto size_before = fs::file_size(path);
  const auto records = run_study(spec_for("random", 7, 10, path));
  CHECK(records.size() == 10);
  CHECK(fs::file_size(path) == size_before);
}

TEST_CASE("kill-and-resume reproduces the uninterrupted log") {
  const fs::path dir = fresh_dir("sloguard_resume");
  const std::string full_path = (dir / "full.jsonl").string();
  const auto full = run_study(spec_for("tba-tpe", 142, 15, full_path));

  std::vector<std::string> full_lines;
  {
    std::ifstream in(full_path);
    std::string line;
    while (std::getline(in, line)) full_lines.push_back(line);
  }
  REQUIRE(full_lines.size() == 15);

  for (int k : {1, 5, 6, 7, 11, 14}) {
    const std::string partial_path = (dir / ("partial_" + std::to_string(k) + ".jsonl")).string();
    {
      std::ofstream out(partial_path);
      for (int i = 0; i < k; ++i) out << full_lines[i] << "\n";
    }
    const auto resumed = run_study(spec_for("tba-tpe", 142, 15, partial_path));
    REQUIRE(resumed.size() == 15);
    for (size_t i = 0; i < resumed.size(); ++i)
      CHECK(dump_without_timestamp(resumed[i]) == dump_without_timestamp(full[i]));
  }
}

TEST_CASE("replayed optimizer state matches the live run") {
  const int k = 9;
  const auto full = run_study(spec_for("tba-tpe", 242, 15));

  // Live path up to k trials.
  HybridOptimizer live(default_space(), OptimizerParams{});
  const StudySpec spec = spec_for("tba-tpe", 242, 15);
  for (int t = 1; t <= k; ++t) run_trial(spec, live, t, nullptr);

  // Replay path over the persisted records.
  HybridOptimizer replayed(default_space(), OptimizerParams{});
  resume_replay(spec, std::span(full.data(), k), replayed);

  CHECK(live.handed_off() == replayed.handed_off());
  CHECK(live.tba().temperature == replayed.tba().temperature);
  CHECK(live.tba().observed == replayed.tba().observed);
  CHECK(live.tba().incumbent.has_value() == replayed.tba().incumbent.has_value());
  if (live.tba().incumbent) CHECK(*live.tba().incumbent == *replayed.tba().incumbent);
  CHECK(live.tba().incumbent_goodput == replayed.tba().incumbent_goodput);
  CHECK(live.tba().bad_regions == replayed.tba().bad_regions);
  REQUIRE(live.tpe().observations.size() == replayed.tpe().observations.size());
  for (size_t i = 0; i < live.tpe().observations.size(); ++i) {
    CHECK(live.tpe().observations[i].config == replayed.tpe().observations[i].config);
    CHECK(live.tpe().observations[i].goodput_tokens_per_s ==
          replayed.tpe().observations[i].goodput_tokens_per_s);
  }

  // Identical proposals at trial k+1.
  Rng r1(child_seed(242, k + 1, rng_stream::kPropose));
  Rng r2(child_seed(242, k + 1, rng_stream::kPropose));
  const Proposal p1 = live.propose(k + 1, 15, r1);
  const Proposal p2 = replayed.propose(k + 1, 15, r2);
  CHECK(p1.config == p2.config);
  CHECK(p1.phase == p2.phase);
}

TEST_CASE("resume refuses gaps and foreign records") {
  const auto full = run_study(spec_for("tba-tpe", 42, 5));

  // Gap: records 1 and 3.
  std::vector<TrialRecord> gapped = {full[0], full[2]};
  HybridOptimizer opt(default_space(), OptimizerParams{});
  CHECK_THROWS_AS(resume_replay(spec_for("tba-tpe", 42, 5), gapped, opt),
                  std::runtime_error);

  // Foreign seed.
  HybridOptimizer opt2(default_space(), OptimizerParams{});
  CHECK_THROWS_AS(resume_replay(spec_for("tba-tpe", 43, 5), full, opt2), std::runtime_error);

  // Foreign optimizer.
  auto random = make_optimizer("random", default_space(), OptimizerParams{});
  CHECK_THROWS_AS(resume_replay(spec_for("random", 42, 5), full, *random), std::runtime_error);
}

TEST_CASE("multiseed matrix: counts, completion, and restart balance") {
  const fs::path dir = fresh_dir("sloguard_matrix");
  StudySpec base;
  base.budget = 6;

  const std::vector<std::string> optimizers = {"random", "tba-tpe"};
  const std::vector<uint64_t> seeds = {42, 142};
  const MultiseedOutcome first = run_multiseed(base, optimizers, seeds, dir, 1);
  CHECK(first.all_ok());
  CHECK(first.studies.size() == 4);
  int total = 0;
  for (const auto& s : first.studies) {
    CHECK(s.completed);
    total += s.new_records;
  }
  CHECK(total == 24);

  // Re-invocation on a complete directory adds nothing.
  const MultiseedOutcome again = run_multiseed(base, optimizers, seeds, dir, 1);
  CHECK(again.all_ok());
  for (const auto& s : again.studies) CHECK(s.new_records == 0);

  // Truncate one log to 2 records and restart: exactly 4 new, none duplicated.
  const std::string victim = (dir / study_log_name("tba-tpe", 142)).string();
  std::vector<std::string> lines;
  {
    std::ifstream in(victim);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  {
    std::ofstream out(victim, std::ios::trunc);
    out << lines[0] << "\n" << lines[1] << "\n";
  }
  const MultiseedOutcome resumed = run_multiseed(base, optimizers, seeds, dir, 1);
  CHECK(resumed.all_ok());
  for (const auto& s : resumed.studies) {
    if (s.optimizer == "tba-tpe" && s.seed == 142) {
      CHECK(s.new_records == 4);
    } else {
      CHECK(s.new_records == 0);
    }
  }
  const auto records = read_trial_log(victim);
  REQUIRE(records.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(records[i].trial_index == i + 1);
  for (size_t i = 0; i < 2; ++i) {
    nlohmann::json j = nlohmann::json::parse(lines[i]);
    CHECK(records[i].trial_index == j.at("trial_index").get<int>());
  }
}

TEST_CASE("parallel seeds produce the same logs as sequential execution") {
  const fs::path seq_dir = fresh_dir("sloguard_jobs_seq");
  const fs::path par_dir = fresh_dir("sloguard_jobs_par");
  StudySpec base;
  base.budget = 5;
  const std::vector<std::string> optimizers = {"random", "tba-tpe"};
  const std::vector<uint64_t> seeds = {1, 2, 3};
  CHECK(run_multiseed(base, optimizers, seeds, seq_dir, 1).all_ok());
  CHECK(run_multiseed(base, optimizers, seeds, par_dir, 3).all_ok());
  for (const std::string& opt : optimizers) {
    for (uint64_t seed : seeds) {
      const auto a = read_trial_log((seq_dir / study_log_name(opt, seed)).string());
      const auto b = read_trial_log((par_dir / study_log_name(opt, seed)).string());
      REQUIRE(a.size() == b.size());
      for (size_t i = 0; i < a.size(); ++i)
        CHECK(dump_without_timestamp(a[i]) == dump_without_timestamp(b[i]));
    }
  }
}

TEST_CASE("summarize_study carries study identity") {
  const auto records = run_study(spec_for("random", 442, 15));
  const SeedSummary s = summarize_study(records);
  CHECK(s.optimizer == "random");
  CHECK(s.seed == 442);
  CHECK(s.budget == 15);
  CHECK(s.feasible_count == 15);
  CHECK(s.crash_count == 0);
  CHECK(s.fast_count >= 1);
}
