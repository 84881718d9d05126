#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sloguard/rng.hpp"

namespace sloguard {

// One serving-engine configuration: the eight tunable knobs.
// enable_chunked_prefill is conditional — it is only meaningful when
// enforce_eager is false and holds its default (false) otherwise.
struct Config {
  std::string quantization = "none";  // "none" | "fp8"
  int max_num_seqs = 64;
  int max_num_batched_tokens = 2048;
  double gpu_memory_utilization = 0.90;
  int max_model_len = 2048;
  bool enforce_eager = false;
  bool enable_chunked_prefill = false;
  bool enable_prefix_caching = false;

  bool operator==(const Config&) const = default;
};

enum class KnobKind { categorical, ordinal_grid, continuous_range };

struct KnobDomain {
  std::string name;
  KnobKind kind;
  std::vector<std::string> categories;  // categorical
  std::vector<int> grid;                // ordinal, strictly increasing
  double lo = 0.0, hi = 0.0;            // continuous, lo < hi
  bool conditional = false;             // meaningful only when enforce_eager=false
};

// The eight-knob space with the declared default domains.
struct SearchSpace {
  std::vector<std::string> quantization_values = {"none", "fp8"};
  std::vector<int> max_num_seqs_grid = {16, 32, 64, 128, 256};
  std::vector<int> max_num_batched_tokens_grid = {512, 1024, 2048, 4096, 8192};
  double gpu_memory_utilization_lo = 0.50;
  double gpu_memory_utilization_hi = 0.95;
  std::vector<int> max_model_len_grid = {512, 1024, 2048, 4096, 8192};

  std::vector<KnobDomain> domains() const;
  bool contains(const Config& c) const;
};

const SearchSpace& default_space();

// Categorical/boolean knob values plus coarse low/mid/high bins for the
// numeric knobs. Keys the crash-region tracker, so equal signatures mean
// "structurally the same place in the space".
struct StructuralSignature {
  int quantization = 0;
  int enforce_eager = 0;
  int enable_chunked_prefill = 0;
  int enable_prefix_caching = 0;
  int max_num_seqs_bin = 0;
  int max_num_batched_tokens_bin = 0;
  int gpu_memory_utilization_bin = 0;
  int max_model_len_bin = 0;

  bool operator==(const StructuralSignature&) const = default;
  std::string key() const;
};

Config sample_uniform(const SearchSpace& space, Rng& rng);

// Mutates exactly one knob: with probability structural_prob flips one
// categorical/boolean knob, otherwise perturbs one numeric knob by one grid
// step (ordinal) or by at most 10% of range (continuous), reflected at the
// bounds so the value always changes. Flipping enforce_eager to true resets
// enable_chunked_prefill to its default.
Config neighbor(const SearchSpace& space, const Config& current, double structural_prob, Rng& rng);

// Linear decay of the structural-move probability from 0.5 at trial 1 to
// 0.1 at trial `budget`.
double structural_prob_schedule(int trial_index, int budget);

StructuralSignature signature(const SearchSpace& space, const Config& config);

// Flat key-value form embedded verbatim in trial records.
nlohmann::json config_to_map(const Config& config);
Config config_from_map(const nlohmann::json& map);

}  // namespace sloguard
