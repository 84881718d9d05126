#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sloguard/search_space.hpp"

namespace sloguard {

// GPU memory geometry of one model deployment: VRAM V, resident model
// footprint F, per-token KV-cache cost kappa, safety margin alpha.
struct HardwareProfile {
  std::string model_id = "qwen2-1.5b";
  int64_t vram_bytes = 40LL << 30;
  int64_t model_footprint_bytes = 3LL << 30;
  int64_t kv_bytes_per_token = 28672;
  double safety_margin = 0.9;
};

struct RepairReport {
  Config original;
  Config repaired;
  std::vector<std::string> actions;

  bool guard_unsatisfiable() const;
};

// Estimated KV token budget floor(alpha * (u*V - F) / kappa). May be <= 0:
// that is a legal return meaning the memory geometry is infeasible.
int64_t kv_token_budget(const HardwareProfile& hw, double gpu_memory_utilization);

// Resolves flag conflicts and enforces the KV guard: clears the
// chunked-prefill/eager conflict, raises max_num_batched_tokens to its
// constraint floor, then steps max_model_len (first) and max_num_seqs (second)
// down the grids until max_num_seqs * max_model_len <= the token budget.
// Unsatisfiable geometry is marked in the action list, not thrown.
RepairReport repair(const SearchSpace& space, const Config& config, const HardwareProfile& hw);

struct RegistryResult {
  HardwareProfile profile;
  bool fallback = false;   // model id not in the registry
  bool zero_vram = false;  // detected VRAM was 0; guard will report K_max <= 0
};

// Per-model table of (F, kappa, alpha). Ships with built-in defaults and can
// be loaded from a flat text file: `model_id footprint_bytes kv_bytes_per_token alpha`.
class ModelRegistry {
 public:
  static ModelRegistry builtin();
  static ModelRegistry from_file(const std::string& path);

  RegistryResult lookup(const std::string& model_id, int64_t detected_vram_bytes) const;

  struct Entry {
    std::string model_id;
    int64_t model_footprint_bytes;
    int64_t kv_bytes_per_token;
    double safety_margin;
  };
  std::vector<Entry> entries;
  Entry fallback_entry{"fallback", 3LL << 30, 28672, 0.9};
};

}  // namespace sloguard
