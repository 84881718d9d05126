#include "sloguard/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sloguard/stats.hpp"

namespace sloguard {

std::string to_string(Phase p) {
  switch (p) {
    case Phase::explore: return "explore";
    case Phase::exploit: return "exploit";
    case Phase::baseline: return "baseline";
  }
  return "explore";
}

Phase phase_from_string(const std::string& s) {
  if (s == "explore") return Phase::explore;
  if (s == "exploit") return Phase::exploit;
  if (s == "baseline") return Phase::baseline;
  throw std::invalid_argument("unknown phase: " + s);
}

// ---- TBA ----

TbaState tba_step(TbaState state, const Observation& obs, const SearchSpace& space,
                  const OptimizerParams& params, Rng& rng) {
  state.observed += 1;

  if (obs.crash != CrashCategory::healthy) {
    // Crash memory: keyed on category + structural signature so the evidence
    // generalizes across nearby configurations. Non-improving step.
    state.bad_regions[{to_string(obs.crash), signature(space, obs.config).key()}] += 1;
  } else {
    state.noncrash_violations.push_back(obs.violation_score);
    if (!state.incumbent) {
      if (obs.violation_score == 0.0) {
        state.incumbent = obs.config;  // first feasible point
        state.incumbent_goodput = obs.goodput_tokens_per_s;
        state.cursor.reset();
      } else if (!state.cursor) {
        state.cursor = obs.config;
        state.cursor_violation = obs.violation_score;
      } else {
        const double dv = obs.violation_score - state.cursor_violation;
        if (dv <= 0.0 ||
            rng.u01() < std::exp(std::max(-50.0, -dv / std::max(state.temperature, 1e-12)))) {
          state.cursor = obs.config;
          state.cursor_violation = obs.violation_score;
        }
      }
    } else if (obs.violation_score == 0.0) {
      // Feasible incumbent stays feasible; goodput Metropolis above the bar.
      const double g_scale = std::max(state.incumbent_goodput, 1e-9);
      const double dg = obs.goodput_tokens_per_s - state.incumbent_goodput;
      const double accept = std::min(
          1.0, std::exp(std::min(50.0, dg / (std::max(state.temperature, 1e-12) * g_scale))));
      if (rng.u01() < accept) {
        state.incumbent = obs.config;
        state.incumbent_goodput = obs.goodput_tokens_per_s;
      }
    }
  }

  if (state.observed == state.init_count) {
    // Initial temperature from the spread of early violation scores, decayed
    // as if it had been in force since trial 1.
    std::vector<double> v = state.noncrash_violations;
    const double spread = sample_std(v).value_or(0.0);
    state.temperature = std::max(spread, params.t0_floor) *
                        std::pow(params.temp_decay, state.init_count - 1);
  }
  state.temperature *= params.temp_decay;
  return state;
}

Config tba_propose(const TbaState& state, const SearchSpace& space, double structural_prob,
                   const OptimizerParams& params, Rng& rng, int* resamples) {
  if (!state.incumbent) throw std::logic_error("tba_propose requires an incumbent");
  if (resamples) *resamples = 0;

  auto crash_count = [&](const Config& c) {
    const std::string key = signature(space, c).key();
    int total = 0;
    for (const auto& [region, count] : state.bad_regions)
      if (region.second == key) total += count;
    return total;
  };

  Config candidate = neighbor(space, *state.incumbent, structural_prob, rng);
  if (crash_count(candidate) >= params.bad_region_threshold) {
    candidate = neighbor(space, *state.incumbent, structural_prob, rng);
    if (resamples) *resamples = 1;
  }
  return candidate;
}

// ---- Handoff ----

HandoffPolicy HandoffPolicy::for_budget(int budget, const OptimizerParams& params) {
  HandoffPolicy p;
  p.t_min = std::max(3, budget / 5);
  p.t_max = std::max(5, static_cast<int>(std::floor(0.4 * budget)));
  p.n_f_min = params.n_f_min;
  p.n_b_min = params.n_b_min;
  return p;
}

HandoffDecision handoff_check(const HandoffPolicy& policy, std::span<const Observation> history) {
  const int n = static_cast<int>(history.size());
  if (n < policy.t_min) return HandoffDecision::stay;
  if (n >= policy.t_max) return HandoffDecision::handoff;
  int n_f = 0, n_b = 0;
  for (const Observation& obs : history) {
    if (obs.feasible()) ++n_f;
    if (obs.crash != CrashCategory::healthy ||
        (obs.crash == CrashCategory::healthy && obs.violation_score > 0.0))
      ++n_b;
  }
  return (n_f >= policy.n_f_min && n_b >= policy.n_b_min) ? HandoffDecision::handoff
                                                          : HandoffDecision::stay;
}

// ---- TPE ----

TpePartition tpe_partition(const TpeState& state) {
  TpePartition part;
  std::vector<const Observation*> feasible;
  for (const Observation& obs : state.observations) {
    if (obs.feasible())
      feasible.push_back(&obs);
    else
      part.bad.push_back(&obs);  // crashes and SLO violations, always
  }
  std::stable_sort(feasible.begin(), feasible.end(), [](const auto* a, const auto* b) {
    return a->goodput_tokens_per_s > b->goodput_tokens_per_s;
  });
  const size_t n_good = feasible.empty()
                            ? 0
                            : static_cast<size_t>(
                                  std::ceil(state.gamma * static_cast<double>(feasible.size())));
  for (size_t i = 0; i < feasible.size(); ++i)
    (i < n_good ? part.good : part.bad).push_back(feasible[i]);
  return part;
}

TpeState tpe_warm_start(std::span<const Observation> history, const OptimizerParams& params) {
  TpeState state;
  state.gamma = params.gamma;
  state.candidate_count = params.candidate_count;
  state.observations.assign(history.begin(), history.end());
  return state;
}

namespace {

struct NumericDim {
  // Observed values in kernel space: grid index for ordinals, raw value for
  // the continuous knob.
  std::vector<double> values;
  std::vector<double> bandwidths;
  double lo = 0.0, hi = 1.0;

  double width() const { return hi - lo; }

  void fit(double domain_lo, double domain_hi) {
    lo = domain_lo;
    hi = domain_hi;
    bandwidths.resize(values.size());
    for (size_t i = 0; i < values.size(); ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (size_t j = 0; j < values.size(); ++j)
        if (j != i) nearest = std::min(nearest, std::abs(values[i] - values[j]));
      if (!std::isfinite(nearest)) nearest = 0.0;
      bandwidths[i] = std::max(width() / 10.0, nearest);
    }
  }

  double density(double x) const {
    if (values.empty()) return 1.0 / width();  // uniform fallback
    double sum = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
      const double z = (x - values[i]) / bandwidths[i];
      sum += std::exp(-0.5 * z * z) / (bandwidths[i] * 2.5066282746310002);
    }
    return sum / static_cast<double>(values.size());
  }
};

double grid_index_of(const std::vector<int>& grid, int value) {
  for (size_t i = 0; i < grid.size(); ++i)
    if (grid[i] == value) return static_cast<double>(i);
  throw std::invalid_argument("value not on grid");
}

struct CategoricalDim {
  // Add-one smoothed frequency table.
  std::map<std::string, int> counts;
  int total = 0;
  int arity = 2;

  void add(const std::string& v) {
    counts[v] += 1;
    total += 1;
  }
  double prob(const std::string& v) const {
    const auto it = counts.find(v);
    const int c = it == counts.end() ? 0 : it->second;
    return (c + 1.0) / (total + arity);
  }
  std::string sample(const std::vector<std::string>& values, Rng& rng) const {
    double r = rng.u01();
    for (const std::string& v : values) {
      const double p = prob(v);
      if (r < p) return v;
      r -= p;
    }
    return values.back();
  }
};

struct KernelModel {
  CategoricalDim quant, eager, prefix, chunked_given_not_eager;
  NumericDim seqs, tokens, util, model_len;
  size_t size = 0;

  static KernelModel fit(const std::vector<const Observation*>& obs, const SearchSpace& space) {
    KernelModel m;
    m.size = obs.size();
    for (const Observation* o : obs) {
      const Config& c = o->config;
      m.quant.add(c.quantization);
      m.eager.add(c.enforce_eager ? "true" : "false");
      m.prefix.add(c.enable_prefix_caching ? "true" : "false");
      // Conditional knob: modeled only where it is meaningful.
      if (!c.enforce_eager) m.chunked_given_not_eager.add(c.enable_chunked_prefill ? "true" : "false");
      m.seqs.values.push_back(grid_index_of(space.max_num_seqs_grid, c.max_num_seqs));
      m.tokens.values.push_back(
          grid_index_of(space.max_num_batched_tokens_grid, c.max_num_batched_tokens));
      m.util.values.push_back(c.gpu_memory_utilization);
      m.model_len.values.push_back(grid_index_of(space.max_model_len_grid, c.max_model_len));
    }
    m.seqs.fit(0, static_cast<double>(space.max_num_seqs_grid.size() - 1));
    m.tokens.fit(0, static_cast<double>(space.max_num_batched_tokens_grid.size() - 1));
    m.util.fit(space.gpu_memory_utilization_lo, space.gpu_memory_utilization_hi);
    m.model_len.fit(0, static_cast<double>(space.max_model_len_grid.size() - 1));
    return m;
  }
};

double reflect_into(double v, double lo, double hi) {
  while (v < lo || v > hi) {
    if (v < lo) v = lo + (lo - v);
    if (v > hi) v = hi - (v - hi);
  }
  return v;
}

int sample_grid_value(const NumericDim& dim, const std::vector<int>& grid, Rng& rng) {
  const size_t i = rng.below(dim.values.size());
  const double x = reflect_into(dim.values[i] + dim.bandwidths[i] * rng.normal(), dim.lo, dim.hi);
  const int idx = std::clamp(static_cast<int>(std::lround(x)), 0,
                             static_cast<int>(grid.size()) - 1);
  return grid[idx];
}

}  // namespace

double tpe_score(const TpePartition& partition, const SearchSpace& space, const Config& candidate) {
  const KernelModel good = KernelModel::fit(partition.good, space);
  const KernelModel bad = KernelModel::fit(partition.bad, space);

  auto cat_ratio = [](const CategoricalDim& g, const CategoricalDim& b, const std::string& v) {
    return g.prob(v) / b.prob(v);
  };

  double score = 1.0;
  score *= cat_ratio(good.quant, bad.quant, candidate.quantization);
  score *= cat_ratio(good.eager, bad.eager, candidate.enforce_eager ? "true" : "false");
  score *= cat_ratio(good.prefix, bad.prefix, candidate.enable_prefix_caching ? "true" : "false");
  if (!candidate.enforce_eager) {
    // Conditional knob contributes only where it is meaningful; ratio 1 elsewhere.
    score *= cat_ratio(good.chunked_given_not_eager, bad.chunked_given_not_eager,
                       candidate.enable_chunked_prefill ? "true" : "false");
  }
  const Config& c = candidate;
  score *= good.seqs.density(grid_index_of(space.max_num_seqs_grid, c.max_num_seqs)) /
           bad.seqs.density(grid_index_of(space.max_num_seqs_grid, c.max_num_seqs));
  score *= good.tokens.density(
               grid_index_of(space.max_num_batched_tokens_grid, c.max_num_batched_tokens)) /
           bad.tokens.density(
               grid_index_of(space.max_num_batched_tokens_grid, c.max_num_batched_tokens));
  score *= good.util.density(c.gpu_memory_utilization) / bad.util.density(c.gpu_memory_utilization);
  score *= good.model_len.density(grid_index_of(space.max_model_len_grid, c.max_model_len)) /
           bad.model_len.density(grid_index_of(space.max_model_len_grid, c.max_model_len));
  return score;
}

Config tpe_propose(const TpeState& state, const SearchSpace& space, Rng& rng) {
  const TpePartition part = tpe_partition(state);
  if (part.good.empty()) return sample_uniform(space, rng);

  const KernelModel good = KernelModel::fit(part.good, space);

  auto draw_candidate = [&]() {
    Config c;
    c.quantization = good.quant.sample(space.quantization_values, rng);
    c.enforce_eager = good.eager.sample({"false", "true"}, rng) == "true";
    c.enable_prefix_caching = good.prefix.sample({"false", "true"}, rng) == "true";
    c.enable_chunked_prefill =
        c.enforce_eager ? false
                        : good.chunked_given_not_eager.sample({"false", "true"}, rng) == "true";
    c.max_num_seqs = sample_grid_value(good.seqs, space.max_num_seqs_grid, rng);
    c.max_num_batched_tokens =
        sample_grid_value(good.tokens, space.max_num_batched_tokens_grid, rng);
    const size_t i = rng.below(good.util.values.size());
    c.gpu_memory_utilization =
        reflect_into(good.util.values[i] + good.util.bandwidths[i] * rng.normal(),
                     space.gpu_memory_utilization_lo, space.gpu_memory_utilization_hi);
    c.max_model_len = sample_grid_value(good.model_len, space.max_model_len_grid, rng);
    return c;
  };

  Config best = draw_candidate();
  double best_score = tpe_score(part, space, best);
  for (int i = 1; i < state.candidate_count; ++i) {
    Config candidate = draw_candidate();
    const double score = tpe_score(part, space, candidate);
    if (score > best_score) {
      best = candidate;
      best_score = score;
    }
  }
  return best;
}

// ---- Strategies ----

namespace {

class RandomOptimizer final : public Optimizer {
 public:
  explicit RandomOptimizer(const SearchSpace& space) : space_(space) {}

  const std::string& name() const override { return name_; }
  Proposal propose(int, int, Rng& rng) override {
    return {sample_uniform(space_, rng), Phase::baseline};
  }
  void observe(const Observation& obs, Rng&) override { history_.push_back(obs); }
  std::span<const Observation> history() const override { return history_; }

 private:
  std::string name_ = "random";
  SearchSpace space_;
  std::vector<Observation> history_;
};

}  // namespace

Proposal HybridOptimizer::propose(int trial_index, int budget, Rng& rng) {
  if (!handed_off_) {
    const HandoffPolicy policy = HandoffPolicy::for_budget(budget, params_);
    if (handoff_check(policy, history_) == HandoffDecision::handoff) {
      handed_off_ = true;
      tpe_ = tpe_warm_start(history_, params_);  // one-way, exactly once
    }
  }
  if (handed_off_) return {tpe_propose(tpe_, space_, rng), Phase::exploit};
  if (trial_index <= params_.n_init || !tba_.incumbent)
    return {sample_uniform(space_, rng), Phase::explore};
  const double structural_prob = structural_prob_schedule(trial_index, budget);
  return {tba_propose(tba_, space_, structural_prob, params_, rng), Phase::explore};
}

void HybridOptimizer::observe(const Observation& obs, Rng& rng) {
  history_.push_back(obs);
  if (handed_off_) {
    tpe_.observations.push_back(obs);
  } else {
    tba_ = tba_step(std::move(tba_), obs, space_, params_, rng);
  }
}

std::vector<std::string> implemented_optimizers() { return {"random", "tba-tpe"}; }

std::unique_ptr<Optimizer> make_optimizer(const std::string& name, const SearchSpace& space,
                                          const OptimizerParams& params) {
  if (name == "random") return std::make_unique<RandomOptimizer>(space);
  if (name == "tba-tpe") return std::make_unique<HybridOptimizer>(space, params);
  if (name == "tba-only" || name == "tpe-cold" || name == "gp-bo")
    throw std::invalid_argument("optimizer '" + name + "' is a deferred baseline (not implemented)");
  throw std::invalid_argument("unknown optimizer: " + name);
}

}  // namespace sloguard
