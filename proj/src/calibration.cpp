#include "sloguard/calibration.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sloguard {

SimCalibration SimCalibration::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open calibration table: " + path);

  SimCalibration cal;
  std::map<std::string, double*> slots = {
      {"base_ttft_ms", &cal.base_ttft_ms},
      {"ttft_jitter_sd_ms", &cal.ttft_jitter_sd_ms},
      {"itl_base_ms", &cal.itl_base_ms},
      {"itl_jitter_sd_ms", &cal.itl_jitter_sd_ms},
      {"prefix_caching_discount", &cal.prefix_caching_discount},
      {"fp8_discount", &cal.fp8_discount},
      {"eager_mult_lo", &cal.eager_mult_lo},
      {"eager_mult_hi", &cal.eager_mult_hi},
      {"concurrent_overhead_lo_ms", &cal.concurrent_overhead_lo_ms},
      {"concurrent_overhead_hi_ms", &cal.concurrent_overhead_hi_ms},
      {"contention_itl_ms", &cal.contention_itl_ms},
      {"concurrent_pacing_factor", &cal.concurrent_pacing_factor},
      {"runtime_fail_prob", &cal.runtime_fail_prob},
      {"runtime_fail_util_threshold", &cal.runtime_fail_util_threshold},
      {"runtime_fail_geometry_fraction", &cal.runtime_fail_geometry_fraction},
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    std::string key, eq;
    double value;
    if (!(row >> key)) continue;
    if (!(row >> eq >> value) || eq != "=")
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected `key = value`");
    auto it = slots.find(key);
    if (it == slots.end())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown key " + key);
    *it->second = value;
  }
  return cal;
}

}  // namespace sloguard
