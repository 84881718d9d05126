#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "sloguard/search_space.hpp"

using namespace sloguard;

namespace {

// Number of knobs on which two configs differ.
int diff_count(const Config& a, const Config& b) {
  int d = 0;
  d += a.quantization != b.quantization;
  d += a.max_num_seqs != b.max_num_seqs;
  d += a.max_num_batched_tokens != b.max_num_batched_tokens;
  d += a.gpu_memory_utilization != b.gpu_memory_utilization;
  d += a.max_model_len != b.max_model_len;
  d += a.enforce_eager != b.enforce_eager;
  d += a.enable_chunked_prefill != b.enable_chunked_prefill;
  d += a.enable_prefix_caching != b.enable_prefix_caching;
  return d;
}

bool categorical_changed(const Config& a, const Config& b) {
  return a.quantization != b.quantization || a.enforce_eager != b.enforce_eager ||
         a.enable_chunked_prefill != b.enable_chunked_prefill ||
         a.enable_prefix_caching != b.enable_prefix_caching;
}

}  // namespace

TEST_CASE("uniform sampling is deterministic under a fixed seed") {
  const SearchSpace& space = default_space();
  for (uint64_t seed : {1ULL, 42ULL, 999ULL}) {
    Rng a(seed), b(seed);
    for (int i = 0; i < 20; ++i) CHECK(sample_uniform(space, a) == sample_uniform(space, b));
  }
}

TEST_CASE("uniform sampling frequencies and the conditional default") {
  const SearchSpace& space = default_space();
  Rng rng(7);
  const int n = 10000;
  int eager = 0, prefix = 0, chunked_when_not_eager = 0, not_eager = 0;
  for (int i = 0; i < n; ++i) {
    const Config c = sample_uniform(space, rng);
    if (c.enforce_eager) {
      // The space never emits the conflict pair.
      CHECK_FALSE(c.enable_chunked_prefill);
      ++eager;
    } else {
      ++not_eager;
      if (c.enable_chunked_prefill) ++chunked_when_not_eager;
    }
    if (c.enable_prefix_caching) ++prefix;
  }
  CHECK(std::abs(eager / double(n) - 0.5) < 0.02);
  CHECK(std::abs(prefix / double(n) - 0.5) < 0.02);
  CHECK(std::abs(chunked_when_not_eager / double(not_eager) - 0.5) < 0.02);
}

TEST_CASE("chi-square does not reject uniformity of the categorical knobs") {
  const SearchSpace& space = default_space();
  Rng rng(11);
  const int n = 10000;
  std::map<std::string, int> quant;
  std::map<int, int> seqs;
  int eager = 0, prefix = 0;
  for (int i = 0; i < n; ++i) {
    const Config c = sample_uniform(space, rng);
    quant[c.quantization]++;
    seqs[c.max_num_seqs]++;
    eager += c.enforce_eager;
    prefix += c.enable_prefix_caching;
  }
  auto chi2_binary = [&](int count) {
    const double e = n / 2.0;
    return (count - e) * (count - e) / e + ((n - count) - e) * ((n - count) - e) / e;
  };
  const double crit_df1 = 6.635;  // alpha = 0.01
  CHECK(chi2_binary(quant["fp8"]) < crit_df1);
  CHECK(chi2_binary(eager) < crit_df1);
  CHECK(chi2_binary(prefix) < crit_df1);

  double chi2_grid = 0.0;
  const double e = n / 5.0;
  for (int v : space.max_num_seqs_grid) chi2_grid += (seqs[v] - e) * (seqs[v] - e) / e;
  CHECK(chi2_grid < 13.277);  // df = 4, alpha = 0.01
}

TEST_CASE("structural_prob=1 flips exactly one categorical knob") {
  const SearchSpace& space = default_space();
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const Config c = sample_uniform(space, rng);
    const Config m = neighbor(space, c, 1.0, rng);
    CHECK(categorical_changed(c, m));
    if (c.enable_chunked_prefill && m.enforce_eager && !c.enforce_eager) {
      // The eager flip collapses the dependent knob to its default.
      CHECK(diff_count(c, m) == 2);
      CHECK_FALSE(m.enable_chunked_prefill);
    } else {
      CHECK(diff_count(c, m) == 1);
    }
  }
}

TEST_CASE("numeric perturbation respects grid bounds") {
  const SearchSpace& space = default_space();
  Rng rng(5);
  Config c;
  c.max_num_seqs = space.max_num_seqs_grid.front();  // at the minimum
  for (int i = 0; i < 300; ++i) {
    const Config m = neighbor(space, c, 0.0, rng);
    CHECK(m.max_num_seqs >= space.max_num_seqs_grid.front());
    if (m.max_num_seqs != c.max_num_seqs) {
      CHECK(m.max_num_seqs == space.max_num_seqs_grid[1]);  // moved up one step
    } else {
      CHECK(diff_count(c, m) == 1);  // a different numeric knob changed
    }
    CHECK(m.gpu_memory_utilization >= space.gpu_memory_utilization_lo);
    CHECK(m.gpu_memory_utilization <= space.gpu_memory_utilization_hi);
  }
}

TEST_CASE("structural-move fraction tracks the branch probability") {
  const SearchSpace& space = default_space();
  Rng rng(13);
  int structural = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const Config c = sample_uniform(space, rng);
    if (categorical_changed(c, neighbor(space, c, 0.5, rng))) ++structural;
  }
  CHECK(std::abs(structural / double(n) - 0.5) < 0.05);
}

TEST_CASE("neighbor locality: exactly one mutated knob") {
  const SearchSpace& space = default_space();
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) {
    const Config c = sample_uniform(space, rng);
    const Config m = neighbor(space, c, 0.35, rng);
    const int d = diff_count(c, m);
    if (d == 2) {
      // Only the conditional collapse may touch a second knob.
      CHECK(m.enforce_eager);
      CHECK_FALSE(c.enforce_eager);
      CHECK(c.enable_chunked_prefill);
      CHECK_FALSE(m.enable_chunked_prefill);
    } else {
      CHECK(d == 1);
    }
  }
}

TEST_CASE("structural-move schedule endpoints and midpoint") {
  CHECK(structural_prob_schedule(1, 15) == doctest::Approx(0.5));
  CHECK(structural_prob_schedule(15, 15) == doctest::Approx(0.1));
  CHECK(structural_prob_schedule(8, 15) == doctest::Approx(0.3));
  CHECK(structural_prob_schedule(1, 1) == doctest::Approx(0.5));
  CHECK_THROWS(structural_prob_schedule(0, 15));
  CHECK_THROWS(structural_prob_schedule(16, 15));
}

TEST_CASE("signatures copy categoricals and bin numerics") {
  const SearchSpace& space = default_space();
  Rng rng(19);
  const Config a = sample_uniform(space, rng);
  CHECK(signature(space, a) == signature(space, a));

  // Differing only inside one numeric bin keeps the signature equal.
  Config b = a;
  b.gpu_memory_utilization = space.gpu_memory_utilization_lo + 0.01;
  Config c = b;
  c.gpu_memory_utilization = space.gpu_memory_utilization_lo + 0.02;
  CHECK(signature(space, b) == signature(space, c));

  Config d = a;
  d.enforce_eager = !d.enforce_eager;
  d.enable_chunked_prefill = false;
  CHECK_FALSE(signature(space, a) == signature(space, d));
  CHECK(signature(space, a).key() != signature(space, d).key());
}

TEST_CASE("config round-trips through the flat key-value map") {
  const SearchSpace& space = default_space();
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    const Config c = sample_uniform(space, rng);
    CHECK((config_from_map(config_to_map(c)) == c));
  }
}
