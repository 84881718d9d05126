#pragma once

#include <string>
#include <vector>

#include "sloguard/repair.hpp"
#include "sloguard/simulator.hpp"

namespace sloguard {

struct CalibrationTarget {
  std::string name;
  double measured = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool pass = false;
};

// Validates the simulator against its calibration targets: cluster means,
// harness wall-clock profile, concurrent-only dispersion, latency bimodality,
// and guard behavior. Deterministic for a fixed seed.
std::vector<CalibrationTarget> run_calibration_suite(const ServingSimulator& sim,
                                                     const HardwareProfile& hw,
                                                     uint64_t seed = 7);

// A config whose sequential per-request mean sits in [lo_ms, hi_ms]; used by
// the wall-clock targets. Throws when the band is empty.
Config find_slow_config(const ServingSimulator& sim, double lo_ms, double hi_ms);

}  // namespace sloguard
