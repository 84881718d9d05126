#include "sloguard/repair.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sloguard {

namespace {

// One grid step down; returns false when already at the minimum.
bool step_down(const std::vector<int>& grid, int& value) {
  auto it = std::find(grid.begin(), grid.end(), value);
  if (it == grid.end() || it == grid.begin()) return false;
  value = *(--it);
  return true;
}

}  // namespace

bool RepairReport::guard_unsatisfiable() const {
  return std::find(actions.begin(), actions.end(), "guard-unsatisfiable") != actions.end();
}

int64_t kv_token_budget(const HardwareProfile& hw, double gpu_memory_utilization) {
  const double usable = gpu_memory_utilization * static_cast<double>(hw.vram_bytes) -
                        static_cast<double>(hw.model_footprint_bytes);
  return static_cast<int64_t>(
      std::floor(hw.safety_margin * usable / static_cast<double>(hw.kv_bytes_per_token)));
}

RepairReport repair(const SearchSpace& space, const Config& config, const HardwareProfile& hw) {
  RepairReport report;
  report.original = config;
  Config& c = report.repaired;
  c = config;

  if (c.enforce_eager && c.enable_chunked_prefill) {
    c.enable_chunked_prefill = false;
    report.actions.push_back("chunked-prefill-cleared");
  }

  auto raise_batched_tokens = [&] {
    const int floor_value = std::max(c.max_num_seqs, c.max_model_len);
    if (c.max_num_batched_tokens < floor_value) {
      c.max_num_batched_tokens = floor_value;
      report.actions.push_back("batched-tokens-raised");
    }
  };
  raise_batched_tokens();

  const int64_t budget = kv_token_budget(hw, c.gpu_memory_utilization);
  while (static_cast<int64_t>(c.max_num_seqs) * c.max_model_len > budget) {
    // Reduce length before sequence count to preserve batch parallelism.
    if (step_down(space.max_model_len_grid, c.max_model_len)) {
      report.actions.push_back("model-len-reduced");
    } else if (step_down(space.max_num_seqs_grid, c.max_num_seqs)) {
      report.actions.push_back("num-seqs-reduced");
    } else {
      report.actions.push_back("guard-unsatisfiable");
      break;
    }
  }
  raise_batched_tokens();

  return report;
}

ModelRegistry ModelRegistry::builtin() {
  ModelRegistry r;
  r.entries.push_back({"qwen2-1.5b", 3LL << 30, 28672, 0.9});
  return r;
}

ModelRegistry ModelRegistry::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model registry: " + path);
  ModelRegistry r;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    Entry e;
    if (!(fields >> e.model_id)) continue;  // blank line
    if (!(fields >> e.model_footprint_bytes >> e.kv_bytes_per_token >> e.safety_margin))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed registry row");
    r.entries.push_back(e);
  }
  if (r.entries.empty()) throw std::runtime_error("empty model registry: " + path);
  return r;
}

RegistryResult ModelRegistry::lookup(const std::string& model_id, int64_t detected_vram_bytes) const {
  RegistryResult result;
  const Entry* entry = &fallback_entry;
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const Entry& e) { return e.model_id == model_id; });
  if (it != entries.end()) {
    entry = &*it;
  } else {
    result.fallback = true;
  }
  if (detected_vram_bytes <= 0) {
    // Error-equivalent: flag it and keep V = 0 so the guard yields K_max <= 0.
    result.fallback = true;
    result.zero_vram = true;
    detected_vram_bytes = 0;
  }
  result.profile.model_id = model_id;
  result.profile.vram_bytes = detected_vram_bytes;
  result.profile.model_footprint_bytes = entry->model_footprint_bytes;
  result.profile.kv_bytes_per_token = entry->kv_bytes_per_token;
  result.profile.safety_margin = entry->safety_margin;
  return result;
}

}  // namespace sloguard
