#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sloguard/metrics.hpp"
#include "sloguard/rng.hpp"
#include "sloguard/search_space.hpp"

namespace sloguard {

enum class Phase { explore, exploit, baseline };

std::string to_string(Phase p);
Phase phase_from_string(const std::string& s);

// One executed trial as the optimizers see it. Immutable once recorded.
struct Observation {
  Config config;  // repaired, as executed
  CrashCategory crash = CrashCategory::healthy;
  double violation_score = 0.0;
  double goodput_tokens_per_s = 0.0;
  std::optional<double> avg_latency_ms;
  int trial_index = 0;  // 1-based
  Phase phase = Phase::explore;

  bool feasible() const { return crash == CrashCategory::healthy && violation_score == 0.0; }
};

// Tunables the strategies share. Defaults reproduce the reference setup and
// every value is overridable from the CLI configuration file.
struct OptimizerParams {
  int n_init = 3;
  int n_f_min = 2;
  int n_b_min = 1;
  double gamma = 0.25;
  int candidate_count = 24;
  double temp_decay = 0.9;
  double t0_floor = 1.0;
  int bad_region_threshold = 2;
};

// ---- TBA: feasible-first annealing with crash memory ----

struct TbaState {
  double temperature = 1.0;
  std::optional<Config> incumbent;  // feasible only, once set
  double incumbent_goodput = 0.0;
  // Pre-feasibility annealing chain; bookkeeping for the violation Metropolis.
  std::optional<Config> cursor;
  double cursor_violation = 0.0;
  int init_count = 3;
  int observed = 0;
  std::vector<double> noncrash_violations;
  // (crash category, structural signature key) -> crash count
  std::map<std::pair<std::string, std::string>, int> bad_regions;
};

TbaState tba_step(TbaState state, const Observation& obs, const SearchSpace& space,
                  const OptimizerParams& params, Rng& rng);

// Temperature-controlled neighbor of the incumbent. A candidate whose
// structural signature has accumulated >= bad_region_threshold crashes (any
// category) is resampled once; the second draw is returned regardless.
Config tba_propose(const TbaState& state, const SearchSpace& space, double structural_prob,
                   const OptimizerParams& params, Rng& rng, int* resamples = nullptr);

// ---- Handoff ----

struct HandoffPolicy {
  int t_min = 3;
  int t_max = 6;
  int n_f_min = 2;
  int n_b_min = 1;

  static HandoffPolicy for_budget(int budget, const OptimizerParams& params);
};

enum class HandoffDecision { stay, handoff };

HandoffDecision handoff_check(const HandoffPolicy& policy, std::span<const Observation> history);

// ---- TPE: density-ratio exploitation ----

struct TpeState {
  std::vector<Observation> observations;
  double gamma = 0.25;
  int candidate_count = 24;
};

struct TpePartition {
  std::vector<const Observation*> good;
  std::vector<const Observation*> bad;
};

// Feasible observations ranked by goodput; the top ceil(gamma * n_feasible)
// form the good set, everything else (crashes and SLO violations always
// included) the bad set.
TpePartition tpe_partition(const TpeState& state);

// Replays the full exploration history, crashes included, into a fresh state.
TpeState tpe_warm_start(std::span<const Observation> history, const OptimizerParams& params);

// Dimension-wise l(theta)/g(theta) of one candidate under the partition.
double tpe_score(const TpePartition& partition, const SearchSpace& space, const Config& candidate);

// Draws candidate_count configs from the good-set kernel mixture and returns
// the density-ratio argmax; uniform fallback when the good set is empty.
Config tpe_propose(const TpeState& state, const SearchSpace& space, Rng& rng);

// ---- Strategy interface ----

struct Proposal {
  Config config;  // unrepaired; the runner applies repair before execution
  Phase phase;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual const std::string& name() const = 0;
  virtual Proposal propose(int trial_index, Rng& rng) = 0;
  virtual void observe(const Observation& obs, Rng& rng) = 0;
  virtual std::span<const Observation> history() const = 0;
};

// "random" or "tba-tpe" (the two-phase hybrid). Deferred baseline names are
// recognized but report themselves unimplemented.
std::unique_ptr<Optimizer> make_optimizer(const std::string& name, const SearchSpace& space,
                                          const OptimizerParams& params, int budget);

std::vector<std::string> implemented_optimizers();

// Hybrid internals are exposed so state can be asserted in tests.
class HybridOptimizer final : public Optimizer {
 public:
  HybridOptimizer(const SearchSpace& space, const OptimizerParams& params, int budget)
      : space_(space), params_(params), budget_(budget) {
    tba_.init_count = params.n_init;
    tpe_.gamma = params.gamma;
    tpe_.candidate_count = params.candidate_count;
  }

  const std::string& name() const override { return name_; }
  Proposal propose(int trial_index, Rng& rng) override;
  void observe(const Observation& obs, Rng& rng) override;
  std::span<const Observation> history() const override { return history_; }

  const TbaState& tba() const { return tba_; }
  const TpeState& tpe() const { return tpe_; }
  bool handed_off() const { return handed_off_; }

 private:
  // The one-way transition fires on the history prefix, so live runs and
  // replays reach the same state regardless of when proposals happen.
  void maybe_handoff();

  std::string name_ = "tba-tpe";
  SearchSpace space_;
  OptimizerParams params_;
  int budget_;
  TbaState tba_;
  TpeState tpe_;
  bool handed_off_ = false;
  std::vector<Observation> history_;
};

}  // namespace sloguard
