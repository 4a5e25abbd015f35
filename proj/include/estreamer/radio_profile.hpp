#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace estreamer {

enum class Technology { Wifi, Hspa, Lte };
enum class FastDormancy { None, Legacy, Rel8 };

std::string_view to_string(Technology t);
std::string_view to_string(FastDormancy fd);
Technology parse_technology(std::string_view s);
FastDormancy parse_fast_dormancy(std::string_view s);

/// Connected-state DRX parameters (LTE only).
struct DrxConfig {
  double idle_ms = 0.0;   ///< inactivity before the duty cycle starts
  double cycle_ms = 0.0;  ///< wake-up period
  double on_ms = 0.0;     ///< on-duration per cycle
};

/// Radio access parameters for one device/network combination.
///
/// Units are seconds, milliwatts and bits per second throughout. For Wi-Fi
/// and LTE the single inactivity timer (PSM timer / RRC idle timer) lives in
/// `t1_s` and `t2_s` is zero.
struct RadioProfile {
  std::string name;
  Technology technology = Technology::Wifi;

  double t1_s = 0.0;
  double t2_s = 0.0;
  double t3_s = 0.0;  ///< HSPA CELL_PCH -> IDLE

  // HSPA P1/P2 have no sensible default and must be configured.
  std::optional<double> p1_mw;
  std::optional<double> p2_mw;
  double p_tail_mw = 0.0;

  // Receive power model: power_rx(r) = (a + k r) * p_tail.
  double a_coeff = 1.0;
  double k_coeff = 0.0;

  std::optional<DrxConfig> drx;
  bool pch_enabled = true;
  FastDormancy fast_dormancy = FastDormancy::None;
  double legacy_fd_timeout_s = 0.0;

  // Floor powers for low-power states; zero keeps them out of comparisons.
  double pch_mw = 0.0;
  double idle_mw = 0.0;
  double drx_off_mw = 0.0;

  /// Extra energy charged for every RRC re-establishment (IDLE -> connected).
  double promotion_energy_mj = 0.0;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;

  /// P1, throwing ConfigError when unset.
  double require_p1() const;
  /// P2, throwing ConfigError when unset and a second timer is configured.
  double require_p2() const;
};

}  // namespace estreamer
