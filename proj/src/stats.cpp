#include "sloguard/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sloguard {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Mid-ranks of the pooled sample, plus sum(t^3 - t) over tie groups.
struct RankedPool {
  std::vector<double> ranks;  // aligned with the pooled value order passed in
  double tie_term = 0.0;
};

RankedPool midranks(const std::vector<double>& pooled) {
  const size_t n = pooled.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return pooled[a] < pooled[b]; });

  RankedPool out;
  out.ranks.resize(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // average of 1-based ranks
    for (size_t k = i; k <= j; ++k) out.ranks[order[k]] = rank;
    const double t = static_cast<double>(j - i + 1);
    out.tie_term += t * t * t - t;
    i = j + 1;
  }
  return out;
}

double u_of_y(std::span<const double> x, std::span<const double> y) {
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const RankedPool rp = midranks(pooled);
  double rank_sum_y = 0.0;
  for (size_t i = x.size(); i < pooled.size(); ++i) rank_sum_y += rp.ranks[i];
  const double m = static_cast<double>(y.size());
  return rank_sum_y - m * (m + 1.0) / 2.0;
}

double exact_p(std::span<const double> x, std::span<const double> y, Alternative alternative) {
  const size_t n = x.size(), m = y.size(), total = n + m;
  if (total > 24) throw std::invalid_argument("exact permutation test limited to n+m <= 24");
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());

  const double u_obs = u_of_y(x, y);
  const double mu = static_cast<double>(n) * static_cast<double>(m) / 2.0;

  // Enumerate all C(total, m) choices of the y labels.
  std::vector<size_t> pick(m);
  std::iota(pick.begin(), pick.end(), 0);
  uint64_t count = 0, hits = 0;
  const double eps = 1e-9;
  for (;;) {
    std::vector<double> xs, ys;
    ys.reserve(m);
    xs.reserve(n);
    size_t pi = 0;
    for (size_t i = 0; i < total; ++i) {
      if (pi < m && pick[pi] == i) {
        ys.push_back(pooled[i]);
        ++pi;
      } else {
        xs.push_back(pooled[i]);
      }
    }
    const double u = u_of_y(xs, ys);
    if (alternative == Alternative::one_sided_greater) {
      if (u >= u_obs - eps) ++hits;
    } else {
      if (std::abs(u - mu) >= std::abs(u_obs - mu) - eps) ++hits;
    }
    ++count;

    // next combination
    size_t k = m;
    while (k > 0 && pick[k - 1] == total - m + (k - 1)) --k;
    if (k == 0) break;
    ++pick[k - 1];
    for (size_t j = k; j < m; ++j) pick[j] = pick[j - 1] + 1;
  }
  return static_cast<double>(hits) / static_cast<double>(count);
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

MannWhitneyResult mann_whitney(std::span<const double> x, std::span<const double> y,
                               Alternative alternative, TestMethod method) {
  if (x.empty() || y.empty()) throw std::invalid_argument("mann_whitney requires nonempty samples");

  MannWhitneyResult result;
  result.method = method;
  result.u_statistic = u_of_y(x, y);

  if (method == TestMethod::exact_permutation) {
    result.p = exact_p(x, y, alternative);
    return result;
  }

  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  const double total = n + m;

  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const RankedPool rp = midranks(pooled);

  const double mu = n * m / 2.0;
  const double var =
      n * m / 12.0 * ((total + 1.0) - rp.tie_term / (total * (total - 1.0)));
  if (var <= 0.0) {
    result.p = 1.0;  // all pooled values identical
    return result;
  }
  const double sigma = std::sqrt(var);
  const double d = result.u_statistic - mu;
  // Upper-tail continuity correction: P(U >= u) ~ 1 - Phi((u - 0.5 - mu)/sigma).
  if (alternative == Alternative::one_sided_greater) {
    result.p = 1.0 - normal_cdf((d - 0.5) / sigma);
  } else {
    result.p = std::min(1.0, 2.0 * (1.0 - normal_cdf((std::abs(d) - 0.5) / sigma)));
  }
  return result;
}

std::vector<double> holm_bonferroni(std::span<const double> p_values, bool monotone) {
  const size_t m = p_values.size();
  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return p_values[a] < p_values[b]; });

  std::vector<double> adjusted(m);
  double running_max = 0.0;
  for (size_t rank = 0; rank < m; ++rank) {
    const double scaled = p_values[order[rank]] * static_cast<double>(m - rank);
    running_max = std::max(running_max, scaled);
    adjusted[order[rank]] = std::min(1.0, monotone ? running_max : scaled);
  }
  return adjusted;
}

std::optional<double> sample_std(std::span<const double> values) {
  if (values.size() < 2) return std::nullopt;
  const double mean = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

StatsReport build_report(std::span<const SeedSummary> summaries, const std::string& baseline_hint) {
  std::map<std::string, std::map<uint64_t, const SeedSummary*>> by_optimizer;
  for (const SeedSummary& s : summaries) by_optimizer[s.optimizer][s.seed] = &s;
  if (by_optimizer.size() != 2)
    throw std::invalid_argument("report requires exactly two optimizers, got " +
                                std::to_string(by_optimizer.size()));

  auto names = by_optimizer.begin();
  std::string a = names->first;
  std::string b = std::next(names)->first;
  if (b == baseline_hint) std::swap(a, b);

  StatsReport report;
  report.baseline = a;
  report.treatment = b;

  std::set<uint64_t> seeds_a, seeds_b;
  for (auto& [seed, _] : by_optimizer[a]) seeds_a.insert(seed);
  for (auto& [seed, _] : by_optimizer[b]) seeds_b.insert(seed);
  if (seeds_a != seeds_b) throw std::invalid_argument("optimizers cover different seed sets");
  report.seeds.assign(seeds_a.begin(), seeds_a.end());

  auto collect = [&](const std::string& opt, auto&& getter) {
    std::vector<double> out;
    for (uint64_t seed : report.seeds) {
      auto v = getter(*by_optimizer[opt][seed]);
      if (v) out.push_back(*v);
    }
    return out;
  };
  auto fast = [](const SeedSummary& s) { return std::optional<double>(s.fast_count); };
  auto phc = [](const SeedSummary& s) { return s.post_hit_consistency; };
  auto best = [](const SeedSummary& s) { return s.best_latency_ms; };

  struct Spec {
    const char* name;
    std::function<std::optional<double>(const SeedSummary&)> get;
    Alternative alt;
  };
  const std::vector<Spec> metric_specs = {
      {"fast_cluster_trials", fast, Alternative::one_sided_greater},
      {"post_hit_consistency", phc, Alternative::one_sided_greater},
      {"best_latency_ms", best, Alternative::two_sided},
  };

  std::vector<double> raw_ps;
  for (const Spec& spec : metric_specs) {
    const std::vector<double> xs = collect(a, spec.get);
    const std::vector<double> ys = collect(b, spec.get);
    if (xs.size() < static_cast<size_t>(report.seeds.size()) ||
        ys.size() < static_cast<size_t>(report.seeds.size()))
      report.notes.push_back(std::string(spec.name) +
                             ": undefined values excluded from aggregation");
    if (xs.empty() || ys.empty())
      throw std::invalid_argument(std::string("metric has no defined values: ") + spec.name);

    MetricRow row;
    row.metric = spec.name;
    row.alternative = spec.alt;
    row.baseline_mean = mean_of(xs);
    row.baseline_std = sample_std(xs);
    row.treatment_mean = mean_of(ys);
    row.treatment_std = sample_std(ys);
    const MannWhitneyResult mw = mann_whitney(xs, ys, spec.alt);
    row.u_statistic = mw.u_statistic;
    row.p_raw = mw.p;
    for (uint64_t seed : report.seeds) {
      auto va = spec.get(*by_optimizer[a][seed]);
      auto vb = spec.get(*by_optimizer[b][seed]);
      if (!va || !vb) continue;
      const bool lower_is_better = spec.alt == Alternative::two_sided;
      if (*va == *vb) continue;
      const bool treatment_better = lower_is_better ? (*vb < *va) : (*vb > *va);
      (treatment_better ? row.treatment_wins : row.baseline_wins)++;
    }
    raw_ps.push_back(row.p_raw);
    report.rows.push_back(std::move(row));
  }

  const std::vector<double> adjusted = holm_bonferroni(raw_ps, /*monotone=*/true);
  for (size_t i = 0; i < report.rows.size(); ++i) report.rows[i].p_adjusted = adjusted[i];

  const auto& best_row = report.rows[2];
  if (best_row.baseline_std && best_row.treatment_std && *best_row.treatment_std > 0)
    report.best_latency_std_ratio = *best_row.baseline_std / *best_row.treatment_std;

  for (uint64_t seed : report.seeds) {
    const SeedSummary& sa = *by_optimizer[a][seed];
    const SeedSummary& sb = *by_optimizer[b][seed];
    report.baseline_feasible += sa.feasible_count;
    report.treatment_feasible += sb.feasible_count;
    report.baseline_crashes += sa.crash_count;
    report.treatment_crashes += sb.crash_count;
    report.total_trials_per_optimizer += sa.budget;
  }
  return report;
}

namespace {

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

std::string opt_fmt(const std::optional<double>& v, int precision = 3) {
  return v ? fmt(*v, precision) : std::string("-");
}

}  // namespace

std::string render_report_text(const StatsReport& r) {
  std::ostringstream os;
  os << "Cross-seed report: " << r.baseline << " vs " << r.treatment << " (" << r.seeds.size()
     << " seeds, " << r.total_trials_per_optimizer << " trials per optimizer)\n";
  os << "seeds:";
  for (uint64_t s : r.seeds) os << " " << s;
  os << "\n\n";

  os << "metric                      " << "  baseline (mean+/-std)   treatment (mean+/-std)"
     << "       U     p-raw     p-adj  test            wins(b/t)\n";
  for (const MetricRow& row : r.rows) {
    std::ostringstream base, treat;
    base << fmt(row.baseline_mean) << " +/- " << opt_fmt(row.baseline_std);
    treat << fmt(row.treatment_mean) << " +/- " << opt_fmt(row.treatment_std);
    os << row.metric << std::string(std::max<int>(1, 28 - static_cast<int>(row.metric.size())), ' ')
       << base.str() << std::string(std::max<int>(1, 24 - static_cast<int>(base.str().size())), ' ')
       << treat.str() << std::string(std::max<int>(1, 24 - static_cast<int>(treat.str().size())), ' ')
       << fmt(row.u_statistic, 1) << "  " << fmt(row.p_raw) << "  " << fmt(row.p_adjusted) << "  "
       << (row.alternative == Alternative::one_sided_greater ? "one-sided/approx"
                                                             : "two-sided/approx")
       << "  " << row.baseline_wins << "/" << row.treatment_wins << "\n";
  }
  os << "\nbest-latency std ratio (" << r.baseline << "/" << r.treatment
     << "): " << fmt(r.best_latency_std_ratio, 2) << "\n";
  if (r.baseline_feasible || r.treatment_feasible) {
    os << "feasible trials: " << r.baseline << " " << r.baseline_feasible << "/"
       << r.total_trials_per_optimizer << ", " << r.treatment << " " << r.treatment_feasible << "/"
       << r.total_trials_per_optimizer << "\n";
    os << "crashes: " << r.baseline << " " << r.baseline_crashes << ", " << r.treatment << " "
       << r.treatment_crashes << "\n";
  }
  for (const std::string& note : r.notes) os << "note: " << note << "\n";
  return os.str();
}

std::string render_report_csv(const StatsReport& r) {
  std::ostringstream os;
  os << "metric,baseline,baseline_mean,baseline_std,treatment,treatment_mean,treatment_std,"
        "u_statistic,p_raw,p_adjusted,alternative,baseline_wins,treatment_wins\n";
  for (const MetricRow& row : r.rows) {
    os << row.metric << "," << r.baseline << "," << fmt(row.baseline_mean, 6) << ","
       << opt_fmt(row.baseline_std, 6) << "," << r.treatment << "," << fmt(row.treatment_mean, 6)
       << "," << opt_fmt(row.treatment_std, 6) << "," << fmt(row.u_statistic, 6) << ","
       << fmt(row.p_raw, 6) << "," << fmt(row.p_adjusted, 6) << ","
       << (row.alternative == Alternative::one_sided_greater ? "one_sided_greater" : "two_sided")
       << "," << row.baseline_wins << "," << row.treatment_wins << "\n";
  }
  os << "best_latency_std_ratio,," << fmt(r.best_latency_std_ratio, 6) << ",,,,,,,,,,\n";
  return os.str();
}

std::string summaries_to_csv(std::span<const SeedSummary> summaries) {
  std::ostringstream os;
  os << "optimizer,seed,budget,fast_count,first_fast,post_hit_consistency,best_latency_ms,"
        "feasible_count,crash_count\n";
  for (const SeedSummary& s : summaries) {
    os << s.optimizer << "," << s.seed << "," << s.budget << "," << s.fast_count << ",";
    if (s.first_fast) os << *s.first_fast;
    os << ",";
    if (s.post_hit_consistency) os << fmt(*s.post_hit_consistency, 6);
    os << ",";
    if (s.best_latency_ms) os << fmt(*s.best_latency_ms, 6);
    os << "," << s.feasible_count << "," << s.crash_count << "\n";
  }
  return os.str();
}

std::vector<SeedSummary> summaries_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open summaries csv: " + path);
  std::vector<SeedSummary> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;  // header
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    while (fields.size() < 9) fields.emplace_back();
    try {
      SeedSummary s;
      s.optimizer = fields[0];
      s.seed = std::stoull(fields[1]);
      s.budget = std::stoi(fields[2]);
      s.fast_count = std::stoi(fields[3]);
      if (!fields[4].empty()) s.first_fast = std::stoi(fields[4]);
      if (!fields[5].empty()) s.post_hit_consistency = std::stod(fields[5]);
      if (!fields[6].empty()) s.best_latency_ms = std::stod(fields[6]);
      if (!fields[7].empty()) s.feasible_count = std::stoi(fields[7]);
      if (!fields[8].empty()) s.crash_count = std::stoi(fields[8]);
      out.push_back(std::move(s));
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed summary row");
    }
  }
  return out;
}

}  // namespace sloguard
