#pragma once

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>

#include "speclab/errors.hpp"
#include "speclab/specdec.hpp"

namespace speclab {

struct RunMetrics {
  std::size_t tokens_generated = 0;
  double elapsed = 0.0;  // simulated seconds
  double throughput = 0.0;
  std::optional<double> tar;
  std::optional<double> speedup_vs_baseline;
};

/// Per-step latencies and power of one device. t_verify_per_token may be 0,
/// which reduces the runtime model to draft + target steps only.
struct DeviceProfile {
  std::string name;
  double t_draft_step = 0.0;
  double t_target_step = 0.0;
  double t_verify_per_token = 0.0;
  double power_watts = 0.0;

  void validate() const {
    if (!(t_draft_step > 0.0) || !(t_target_step > 0.0)) throw RangeError(name + ": step times must be > 0");
    if (!(t_verify_per_token >= 0.0)) throw RangeError(name + ": t_verify_per_token must be >= 0");
    if (!(power_watts > 0.0)) throw RangeError(name + ": power_watts must be > 0");
  }

  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

/// Accepted drafted tokens over all drafted tokens; empty when nothing was drafted.
inline std::optional<double> token_acceptance_rate(const DecodeTrace& trace) {
  std::size_t accepted = 0;
  std::size_t drafted = 0;
  for (const auto& it : trace.iterations) {
    accepted += it.accept_count;
    drafted += it.drafted.size();
  }
  if (drafted == 0) return std::nullopt;
  return static_cast<double>(accepted) / static_cast<double>(drafted);
}

inline double speedup_ratio(double spec_throughput, double baseline_throughput) {
  if (!(baseline_throughput > 0.0)) throw RangeError("baseline throughput must be > 0");
  return spec_throughput / baseline_throughput;
}

/// Speedup when every drafted token is accepted:
/// (gamma + 1) t_target / (gamma t_draft + t_target).
inline double ideal_speedup(std::size_t gamma, double t_draft, double t_target) {
  if (!(t_draft > 0.0) || !(t_target > 0.0)) throw RangeError("step times must be > 0");
  const double g = static_cast<double>(gamma);
  return ((g + 1.0) * t_target) / (g * t_draft + t_target);
}

/// End-to-end speedup when only a fraction f of runtime is accelerated by s.
inline double amdahl_end_to_end(double verify_fraction, double verify_speedup) {
  if (!(verify_fraction > 0.0 && verify_fraction < 1.0)) throw RangeError("fraction must lie in (0, 1)");
  if (!(verify_speedup > 0.0) || !std::isfinite(verify_speedup)) throw RangeError("speedup must be finite and > 0");
  return 1.0 / ((1.0 - verify_fraction) + verify_fraction / verify_speedup);
}

/// Simulated wall-clock of a trace: per iteration
///   gamma_i t_draft + t_target + (gamma_i + 1) t_verify.
/// `gamma` is the configured draft length; every iteration must match it.
inline double simulate_runtime(const DecodeTrace& trace, const DeviceProfile& profile, std::size_t gamma) {
  double total = 0.0;
  for (const auto& it : trace.iterations) {
    const std::size_t g = it.drafted.size();
    if (g != gamma) throw ShapeError("iteration drafted " + std::to_string(g) + " tokens, expected " +
                                     std::to_string(gamma));
    const double gd = static_cast<double>(g);
    total += gd * profile.t_draft_step + profile.t_target_step + (gd + 1.0) * profile.t_verify_per_token;
  }
  return total;
}

inline double tokens_per_sec_per_watt(double tokens, double elapsed, double power_watts) {
  if (!(tokens >= 0.0)) throw RangeError("token count must be >= 0");
  if (!(elapsed > 0.0)) throw RangeError("elapsed must be > 0");
  if (!(power_watts > 0.0)) throw RangeError("power must be > 0");
  return (tokens / elapsed) / power_watts;
}

/// Rounds half away from zero (half-up for the non-negative ratios we print)
/// to `digits` decimals and renders with exactly that many.
inline std::string render_fixed(double value, int digits = 2) {
  const double scale = std::pow(10.0, digits);
  // nudge keeps decimal ties like 1.005 from rounding down through binary error
  const double rounded = std::round(value * scale * (1.0 + 1e-12)) / scale;
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << rounded;
  return os.str();
}

/// Reference ratios reported for the hardware verify unit. Stored as
/// fixtures only; nothing in the library derives them.
namespace fixtures {
inline constexpr double kRateVsA100 = 6.99;
inline constexpr double kRateVsA6000 = 7.74;
inline constexpr double kEfficiencyVsA100 = 117.95;
inline constexpr double kEfficiencyVsA6000 = 159.66;
inline constexpr double kVerifyFractionLow = 0.02;
inline constexpr double kVerifyFractionHigh = 0.10;
}  // namespace fixtures

}  // namespace speclab
