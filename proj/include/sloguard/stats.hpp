#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sloguard/metrics.hpp"

namespace sloguard {

enum class Alternative { one_sided_greater, two_sided };
enum class TestMethod { normal_approx, exact_permutation };

struct MannWhitneyResult {
  double u_statistic = 0.0;  // U of the second sample (the one tested as greater)
  double p = 1.0;
  TestMethod method = TestMethod::normal_approx;
};

// Mann-Whitney U from mid-rank sums. The approximation uses the tie-corrected
// variance and a 0.5 continuity correction of the upper tail, so the one-sided
// pair satisfies p(x,y) + p(y,x) = 1 + (statistic tie mass) on tie-free data.
// one_sided_greater tests whether y stochastically exceeds x. An all-identical
// pooled sample gives p = 1 by convention. The exact method enumerates all
// C(n+m, n) labelings.
MannWhitneyResult mann_whitney(std::span<const double> x, std::span<const double> y,
                               Alternative alternative,
                               TestMethod method = TestMethod::normal_approx);

// Step-down multiple-comparison adjustment, returned in input order.
// monotone=true is standard Holm (running max over the sorted sequence);
// monotone=false keeps the per-rank multiplier products.
std::vector<double> holm_bonferroni(std::span<const double> p_values, bool monotone = true);

// Unbiased (n-1) standard deviation; nullopt below two values.
std::optional<double> sample_std(std::span<const double> values);

struct MetricRow {
  std::string metric;
  double baseline_mean = 0.0;
  std::optional<double> baseline_std;
  double treatment_mean = 0.0;
  std::optional<double> treatment_std;
  double u_statistic = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  Alternative alternative = Alternative::one_sided_greater;
  int treatment_wins = 0;  // per-seed wins for the treatment (ties excluded)
  int baseline_wins = 0;
};

struct StatsReport {
  std::string baseline;   // optimizer names
  std::string treatment;
  std::vector<uint64_t> seeds;
  std::vector<MetricRow> rows;  // fast_count, post_hit_consistency, best_latency
  double best_latency_std_ratio = 1.0;  // baseline std / treatment std
  int baseline_feasible = 0, treatment_feasible = 0;
  int baseline_crashes = 0, treatment_crashes = 0;
  int total_trials_per_optimizer = 0;
  std::vector<std::string> notes;
};

// Cross-seed report over per-(optimizer, seed) summaries: mean +/- std per
// metric, Mann-Whitney tests (one-sided for the consistency metrics, two-sided
// for best latency), Holm adjustment across the three-metric family, the
// best-latency spread ratio, and per-seed win counts. Requires exactly two
// optimizers covering identical seed sets.
StatsReport build_report(std::span<const SeedSummary> summaries,
                         const std::string& baseline_hint = "random");

std::string render_report_text(const StatsReport& report);
std::string render_report_csv(const StatsReport& report);

std::vector<SeedSummary> summaries_from_csv(const std::string& path);
std::string summaries_to_csv(std::span<const SeedSummary> summaries);

}  // namespace sloguard
