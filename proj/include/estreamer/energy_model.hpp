#pragma once

#include <span>
#include <vector>

#include "estreamer/radio_profile.hpp"

// Closed-form average power of periodic burst delivery.
//
// Canonical units: bits/s, seconds, milliwatts, millijoules. Buffer sizes are
// carried in bytes (the way clients report them) and converted to bits here.

namespace estreamer::energy {

/// One periodic-burst operating point.
struct BurstScenario {
  double r_s_bps = 0.0;         ///< stream encoding rate
  double r_btc_bps = 0.0;       ///< TCP bulk transfer capacity
  double buffer_b_bytes = 0.0;  ///< free client buffer space
  double interval_t_s = 0.0;    ///< burst interval

  /// Throws DomainError unless all fields are positive and r_s <= r_btc.
  void validate() const;
  /// True when one burst (r_s * T) fits the buffer.
  bool fits() const;
};

/// Receive power at `rate_bps`.
double power_rx(double rate_bps, const RadioProfile& profile);
/// power_rx(rate) - p_tail.
double delta_power_rx(double rate_bps, const RadioProfile& profile);

/// Idle time between bursts, T (1 - r_s / r_btc).
double idle_time(const BurstScenario& s);

/// Tail energy spent during an idle gap of `t_idle_s`, three-case timer split.
double tail_energy_for_idle(double t_idle_s, const RadioProfile& profile);

/// Tail energy per burst period. Requires the burst to fit the buffer.
double tail_energy(const BurstScenario& s, const RadioProfile& profile);

/// Tail energy per period once the burst overflows the buffer. The idle gap is
/// then fixed at B/r_s - B/r_btc, independent of T.
double overflow_tail_energy(const BurstScenario& s, const RadioProfile& profile);

/// Average power while the burst fits (r_s T <= B).
double avg_power_fitting(const BurstScenario& s, const RadioProfile& profile);
/// Average power while the burst overflows (r_s T > B).
double avg_power_overflow(const BurstScenario& s, const RadioProfile& profile);
/// Dispatches between the two regimes.
double avg_power(const BurstScenario& s, const RadioProfile& profile);

/// min(B / r_s, t_max): the largest interval whose burst fits the buffer.
double optimal_interval(const RadioProfile& profile, double r_s_bps, double r_btc_bps, double buffer_b_bytes,
                        double t_max_s);

struct SurfaceRow {
  Technology technology;
  double r_s_bps;
  double buffer_bytes;
  double interval_s;
  double avg_power_mw;
};

/// Grid evaluation, r_s-major, then B, then T. `r_btc_bps` is the bulk rate
/// used for every point.
std::vector<SurfaceRow> power_surface(const RadioProfile& profile, double r_btc_bps, std::span<const double> r_s_list,
                                      std::span<const double> t_list, std::span<const double> b_list);

}  // namespace estreamer::energy
