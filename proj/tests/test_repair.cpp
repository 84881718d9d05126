#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "sloguard/repair.hpp"

using namespace sloguard;

namespace {

HardwareProfile plain_budget_hw(int64_t budget_tokens) {
  // alpha=1, kappa=1, F=0, so K_max(1.0) == V == budget_tokens exactly.
  HardwareProfile hw;
  hw.vram_bytes = budget_tokens;
  hw.model_footprint_bytes = 0;
  hw.kv_bytes_per_token = 1;
  hw.safety_margin = 1.0;
  return hw;
}

}  // namespace

TEST_CASE("kv_token_budget hand evaluations") {
  HardwareProfile hw;
  hw.vram_bytes = 1000000;
  hw.model_footprint_bytes = 200000;
  hw.kv_bytes_per_token = 100;
  hw.safety_margin = 0.5;
  CHECK(kv_token_budget(hw, 0.7) == 2500);

  hw.safety_margin = 0.9;
  CHECK(kv_token_budget(hw, 0.2) == 0);  // u*V == F

  CHECK(kv_token_budget(plain_budget_hw(123456), 1.0) == 123456);
}

TEST_CASE("negative budget is a legal return") {
  HardwareProfile hw;
  hw.vram_bytes = 0;  // zero-VRAM marker from the registry
  CHECK(kv_token_budget(hw, 0.9) <= 0);
}

TEST_CASE("repair clears the eager/chunked-prefill conflict") {
  Config c;
  c.enforce_eager = true;
  c.enable_chunked_prefill = true;
  c.max_num_seqs = 16;
  c.max_model_len = 512;
  const RepairReport rep = repair(default_space(), c, HardwareProfile{});
  CHECK_FALSE(rep.repaired.enable_chunked_prefill);
  CHECK(rep.repaired.enforce_eager);
  REQUIRE(rep.actions.size() >= 1);
  CHECK(rep.actions.front() == "chunked-prefill-cleared");
}

TEST_CASE("valid configs are fixed points") {
  Config c;
  c.max_num_seqs = 32;
  c.max_model_len = 1024;
  c.max_num_batched_tokens = 2048;
  c.gpu_memory_utilization = 0.8;
  const RepairReport rep = repair(default_space(), c, HardwareProfile{});
  CHECK(rep.repaired == c);
  CHECK(rep.actions.empty());
}

TEST_CASE("step-down loop reduces model length first") {
  Config c;
  c.max_num_seqs = 256;
  c.max_model_len = 8192;
  c.max_num_batched_tokens = 8192;
  c.gpu_memory_utilization = 1.0;
  const RepairReport rep = repair(default_space(), c, plain_budget_hw(500000));
  // 256*8192 -> 256*4096 -> 256*2048 -> 256*1024 = 262144 <= 500000
  CHECK(rep.repaired.max_model_len == 1024);
  CHECK(rep.repaired.max_num_seqs == 256);
  CHECK((rep.actions == std::vector<std::string>{"model-len-reduced", "model-len-reduced",
                                                 "model-len-reduced"}));
}

TEST_CASE("num-seqs reductions only begin once model length bottoms out") {
  Config c;
  c.max_num_seqs = 256;
  c.max_model_len = 8192;
  c.max_num_batched_tokens = 8192;
  c.gpu_memory_utilization = 1.0;
  const RepairReport rep = repair(default_space(), c, plain_budget_hw(40000));
  // Needs 256->64 after the length hits 512: 64*512 = 32768 <= 40000.
  CHECK(rep.repaired.max_model_len == 512);
  CHECK(rep.repaired.max_num_seqs == 64);
  const auto first_seqs = std::find(rep.actions.begin(), rep.actions.end(), "num-seqs-reduced");
  const auto last_len =
      std::find(rep.actions.rbegin(), rep.actions.rend(), "model-len-reduced").base();
  REQUIRE(first_seqs != rep.actions.end());
  CHECK(last_len <= first_seqs);  // every length reduction precedes any seqs reduction
}

TEST_CASE("unsatisfiable geometry is marked, not thrown") {
  Config c;
  c.max_num_seqs = 256;
  c.max_model_len = 8192;
  const RepairReport rep = repair(default_space(), c, plain_budget_hw(100));  // < 16*512
  CHECK(rep.guard_unsatisfiable());
  CHECK(rep.repaired.max_num_seqs == 16);
  CHECK(rep.repaired.max_model_len == 512);
  // Still idempotent.
  const RepairReport again = repair(default_space(), rep.repaired, plain_budget_hw(100));
  CHECK(again.repaired == rep.repaired);
}

TEST_CASE("repair is idempotent and never worsens geometry") {
  const SearchSpace& space = default_space();
  Rng rng(31);
  const HardwareProfile profiles[] = {HardwareProfile{}, plain_budget_hw(300000),
                                      plain_budget_hw(20000)};
  for (int i = 0; i < 2000; ++i) {
    const Config c = sample_uniform(space, rng);
    for (const HardwareProfile& hw : profiles) {
      const RepairReport rep = repair(space, c, hw);
      CHECK(rep.repaired.max_num_seqs <= c.max_num_seqs);
      CHECK(rep.repaired.max_model_len <= c.max_model_len);
      CHECK(rep.repaired.max_num_batched_tokens >=
            std::max(rep.repaired.max_num_seqs, rep.repaired.max_model_len));
      CHECK_FALSE((rep.repaired.enforce_eager && rep.repaired.enable_chunked_prefill));
      if (!rep.guard_unsatisfiable()) {
        CHECK(static_cast<int64_t>(rep.repaired.max_num_seqs) * rep.repaired.max_model_len <=
              kv_token_budget(hw, rep.repaired.gpu_memory_utilization));
      }
      const RepairReport again = repair(space, rep.repaired, hw);
      CHECK(again.repaired == rep.repaired);
    }
  }
}

TEST_CASE("registry lookup: known, unknown, and zero-VRAM paths") {
  const ModelRegistry registry = ModelRegistry::builtin();

  const RegistryResult known = registry.lookup("qwen2-1.5b", 1000);
  CHECK_FALSE(known.fallback);
  CHECK(known.profile.vram_bytes == 1000);
  CHECK(known.profile.model_footprint_bytes == (3LL << 30));
  CHECK(known.profile.kv_bytes_per_token == 28672);

  const RegistryResult unknown = registry.lookup("mystery-model", 1000);
  CHECK(unknown.fallback);
  CHECK(unknown.profile.vram_bytes == 1000);

  const RegistryResult zero = registry.lookup("qwen2-1.5b", 0);
  CHECK(zero.fallback);
  CHECK(zero.zero_vram);
  CHECK(kv_token_budget(zero.profile, 0.95) <= 0);
}

TEST_CASE("registry file parses the shipped table") {
  const ModelRegistry registry =
      ModelRegistry::from_file(std::string(SLOGUARD_SOURCE_DIR) + "/data/model_registry.txt");
  const RegistryResult r = registry.lookup("qwen2-1.5b", 40LL << 30);
  CHECK_FALSE(r.fallback);
  CHECK(r.profile.model_footprint_bytes == (3LL << 30));
  CHECK(r.profile.kv_bytes_per_token == 28672);
  CHECK(r.profile.safety_margin == doctest::Approx(0.9));
}
