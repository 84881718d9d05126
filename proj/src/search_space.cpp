#include "sloguard/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sloguard {

namespace {

int grid_index(const std::vector<int>& grid, int value) {
  auto it = std::find(grid.begin(), grid.end(), value);
  if (it == grid.end()) throw std::invalid_argument("value not on grid: " + std::to_string(value));
  return static_cast<int>(it - grid.begin());
}

int bin_of_index(int idx, int n) { return std::min(2, idx * 3 / n); }

int bin_of_fraction(double v, double lo, double hi) {
  const double t = (v - lo) / (hi - lo);
  return std::clamp(static_cast<int>(t * 3.0), 0, 2);
}

// Reflect a continuous value into [lo, hi].
double reflect(double v, double lo, double hi) {
  while (v < lo || v > hi) {
    if (v < lo) v = lo + (lo - v);
    if (v > hi) v = hi - (v - hi);
  }
  return v;
}

}  // namespace

std::vector<KnobDomain> SearchSpace::domains() const {
  std::vector<KnobDomain> d;
  d.push_back({"quantization", KnobKind::categorical, quantization_values, {}, 0, 0, false});
  d.push_back({"max_num_seqs", KnobKind::ordinal_grid, {}, max_num_seqs_grid, 0, 0, false});
  d.push_back({"max_num_batched_tokens", KnobKind::ordinal_grid, {}, max_num_batched_tokens_grid, 0, 0, false});
  d.push_back({"gpu_memory_utilization", KnobKind::continuous_range, {}, {},
               gpu_memory_utilization_lo, gpu_memory_utilization_hi, false});
  d.push_back({"max_model_len", KnobKind::ordinal_grid, {}, max_model_len_grid, 0, 0, false});
  d.push_back({"enforce_eager", KnobKind::categorical, {"false", "true"}, {}, 0, 0, false});
  d.push_back({"enable_chunked_prefill", KnobKind::categorical, {"false", "true"}, {}, 0, 0, true});
  d.push_back({"enable_prefix_caching", KnobKind::categorical, {"false", "true"}, {}, 0, 0, false});
  return d;
}

bool SearchSpace::contains(const Config& c) const {
  auto on_grid = [](const std::vector<int>& g, int v) {
    return std::find(g.begin(), g.end(), v) != g.end();
  };
  return (c.quantization == "none" || c.quantization == "fp8") &&
         on_grid(max_num_seqs_grid, c.max_num_seqs) &&
         on_grid(max_num_batched_tokens_grid, c.max_num_batched_tokens) &&
         c.gpu_memory_utilization >= gpu_memory_utilization_lo &&
         c.gpu_memory_utilization <= gpu_memory_utilization_hi &&
         on_grid(max_model_len_grid, c.max_model_len);
}

const SearchSpace& default_space() {
  static const SearchSpace space;
  return space;
}

std::string StructuralSignature::key() const {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "q%de%dc%dp%d|s%db%du%dm%d", quantization, enforce_eager,
                enable_chunked_prefill, enable_prefix_caching, max_num_seqs_bin,
                max_num_batched_tokens_bin, gpu_memory_utilization_bin, max_model_len_bin);
  return buf;
}

Config sample_uniform(const SearchSpace& space, Rng& rng) {
  Config c;
  c.quantization = space.quantization_values[rng.below(space.quantization_values.size())];
  c.max_num_seqs = space.max_num_seqs_grid[rng.below(space.max_num_seqs_grid.size())];
  c.max_num_batched_tokens =
      space.max_num_batched_tokens_grid[rng.below(space.max_num_batched_tokens_grid.size())];
  c.gpu_memory_utilization =
      rng.uniform(space.gpu_memory_utilization_lo, space.gpu_memory_utilization_hi);
  c.max_model_len = space.max_model_len_grid[rng.below(space.max_model_len_grid.size())];
  c.enforce_eager = rng.coin();
  c.enable_prefix_caching = rng.coin();
  // Conditional knob: drawn only when meaningful, default false otherwise.
  c.enable_chunked_prefill = c.enforce_eager ? false : rng.coin();
  return c;
}

double structural_prob_schedule(int trial_index, int budget) {
  if (trial_index < 1 || budget < 1 || trial_index > budget)
    throw std::invalid_argument("trial_index out of [1, budget]");
  if (budget == 1) return 0.5;
  const double t = static_cast<double>(trial_index - 1) / static_cast<double>(budget - 1);
  return 0.5 + (0.1 - 0.5) * t;
}

Config neighbor(const SearchSpace& space, const Config& current, double structural_prob, Rng& rng) {
  Config c = current;
  if (rng.u01() < structural_prob) {
    // Structural move: flip one categorical/boolean knob. The conditional
    // knob is only flippable while its condition holds.
    std::vector<int> eligible = {0, 1, 3};  // quantization, enforce_eager, enable_prefix_caching
    if (!c.enforce_eager) eligible.push_back(2);
    switch (eligible[rng.below(eligible.size())]) {
      case 0:
        c.quantization = (c.quantization == "none") ? "fp8" : "none";
        break;
      case 1:
        c.enforce_eager = !c.enforce_eager;
        if (c.enforce_eager) c.enable_chunked_prefill = false;  // conditional default
        break;
      case 2:
        c.enable_chunked_prefill = !c.enable_chunked_prefill;
        break;
      case 3:
        c.enable_prefix_caching = !c.enable_prefix_caching;
        break;
    }
    return c;
  }

  // Numeric move: one knob by one grid step (ordinal) or <=10% of range
  // (continuous), reflected at the bounds.
  auto step_grid = [&](const std::vector<int>& grid, int value) {
    int idx = grid_index(grid, value);
    int dir = rng.coin() ? 1 : -1;
    if (idx == 0) dir = 1;
    if (idx == static_cast<int>(grid.size()) - 1) dir = -1;
    return grid[idx + dir];
  };
  switch (rng.below(4)) {
    case 0:
      c.max_num_seqs = step_grid(space.max_num_seqs_grid, c.max_num_seqs);
      break;
    case 1:
      c.max_num_batched_tokens = step_grid(space.max_num_batched_tokens_grid, c.max_num_batched_tokens);
      break;
    case 2: {
      const double range = space.gpu_memory_utilization_hi - space.gpu_memory_utilization_lo;
      const double delta = rng.uniform(-0.1, 0.1) * range;
      c.gpu_memory_utilization = reflect(c.gpu_memory_utilization + delta,
                                         space.gpu_memory_utilization_lo,
                                         space.gpu_memory_utilization_hi);
      break;
    }
    case 3:
      c.max_model_len = step_grid(space.max_model_len_grid, c.max_model_len);
      break;
  }
  return c;
}

StructuralSignature signature(const SearchSpace& space, const Config& config) {
  StructuralSignature s;
  s.quantization = (config.quantization == "fp8") ? 1 : 0;
  s.enforce_eager = config.enforce_eager ? 1 : 0;
  s.enable_chunked_prefill = config.enable_chunked_prefill ? 1 : 0;
  s.enable_prefix_caching = config.enable_prefix_caching ? 1 : 0;
  s.max_num_seqs_bin = bin_of_index(grid_index(space.max_num_seqs_grid, config.max_num_seqs),
                                    static_cast<int>(space.max_num_seqs_grid.size()));
  s.max_num_batched_tokens_bin =
      bin_of_index(grid_index(space.max_num_batched_tokens_grid, config.max_num_batched_tokens),
                   static_cast<int>(space.max_num_batched_tokens_grid.size()));
  s.gpu_memory_utilization_bin =
      bin_of_fraction(config.gpu_memory_utilization, space.gpu_memory_utilization_lo,
                      space.gpu_memory_utilization_hi);
  s.max_model_len_bin = bin_of_index(grid_index(space.max_model_len_grid, config.max_model_len),
                                     static_cast<int>(space.max_model_len_grid.size()));
  return s;
}

nlohmann::json config_to_map(const Config& config) {
  return nlohmann::json{{"quantization", config.quantization},
                        {"max_num_seqs", config.max_num_seqs},
                        {"max_num_batched_tokens", config.max_num_batched_tokens},
                        {"gpu_memory_utilization", config.gpu_memory_utilization},
                        {"max_model_len", config.max_model_len},
                        {"enforce_eager", config.enforce_eager},
                        {"enable_chunked_prefill", config.enable_chunked_prefill},
                        {"enable_prefix_caching", config.enable_prefix_caching}};
}

Config config_from_map(const nlohmann::json& map) {
  Config c;
  c.quantization = map.at("quantization").get<std::string>();
  c.max_num_seqs = map.at("max_num_seqs").get<int>();
  c.max_num_batched_tokens = map.at("max_num_batched_tokens").get<int>();
  c.gpu_memory_utilization = map.at("gpu_memory_utilization").get<double>();
  c.max_model_len = map.at("max_model_len").get<int>();
  c.enforce_eager = map.at("enforce_eager").get<bool>();
  c.enable_chunked_prefill = map.at("enable_chunked_prefill").get<bool>();
  c.enable_prefix_caching = map.at("enable_prefix_caching").get<bool>();
  return c;
}

}  // namespace sloguard
