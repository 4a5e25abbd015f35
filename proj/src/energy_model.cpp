#include "estreamer/energy_model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "estreamer/errors.hpp"

namespace estreamer::energy {

void BurstScenario::validate() const {
  if (!(r_s_bps > 0.0) || !(r_btc_bps > 0.0) || !(buffer_b_bytes > 0.0) || !(interval_t_s > 0.0)) {
    throw DomainError(fmt::format("burst scenario fields must be positive (r_s={}, r_btc={}, B={}, T={})", r_s_bps,
                                  r_btc_bps, buffer_b_bytes, interval_t_s));
  }
  if (r_s_bps > r_btc_bps) {
    throw DomainError(fmt::format("encoding rate {} exceeds bulk transfer capacity {}", r_s_bps, r_btc_bps));
  }
}

bool BurstScenario::fits() const { return r_s_bps * interval_t_s <= 8.0 * buffer_b_bytes; }

double power_rx(double rate_bps, const RadioProfile& profile) {
  if (!(rate_bps >= 0.0)) throw DomainError(fmt::format("receive rate must be >= 0 (got {})", rate_bps));
  return (profile.a_coeff + profile.k_coeff * rate_bps) * profile.p_tail_mw;
}

double delta_power_rx(double rate_bps, const RadioProfile& profile) {
  return power_rx(rate_bps, profile) - profile.p_tail_mw;
}

double idle_time(const BurstScenario& s) {
  s.validate();
  return s.interval_t_s * (1.0 - s.r_s_bps / s.r_btc_bps);
}

double tail_energy_for_idle(double t_idle_s, const RadioProfile& profile) {
  if (!(t_idle_s >= 0.0)) throw DomainError(fmt::format("idle time must be >= 0 (got {})", t_idle_s));
  const double t1 = profile.t1_s;
  const double t2 = profile.t2_s;
  const double p1 = profile.require_p1();
  if (t_idle_s < t1) return p1 * t_idle_s;
  const double p2 = t2 > 0.0 ? profile.require_p2() : 0.0;
  if (t_idle_s < t1 + t2) return p1 * t1 + p2 * (t_idle_s - t1);
  return p1 * t1 + p2 * t2;
}

double tail_energy(const BurstScenario& s, const RadioProfile& profile) {
  s.validate();
  if (!s.fits()) {
    throw PreconditionError(
        "burst overflows the client buffer (r_s*T > B); the tail is constant there, use avg_power_overflow");
  }
  return tail_energy_for_idle(idle_time(s), profile);
}

double overflow_tail_energy(const BurstScenario& s, const RadioProfile& profile) {
  s.validate();
  const double b_bits = 8.0 * s.buffer_b_bytes;
  const double fixed_idle = b_bits / s.r_s_bps - b_bits / s.r_btc_bps;
  return tail_energy_for_idle(fixed_idle, profile);
}

double avg_power_fitting(const BurstScenario& s, const RadioProfile& profile) {
  const double e_tail = tail_energy(s, profile);
  return (s.r_s_bps / s.r_btc_bps) * delta_power_rx(s.r_btc_bps, profile) + e_tail / s.interval_t_s;
}

double avg_power_overflow(const BurstScenario& s, const RadioProfile& profile) {
  s.validate();
  if (s.fits()) throw PreconditionError("burst fits the client buffer (r_s*T <= B); use avg_power_fitting");
  const double t = s.interval_t_s;
  const double b_bits = 8.0 * s.buffer_b_bytes;
  const double in_buffer = b_bits * delta_power_rx(s.r_btc_bps, profile) / (t * s.r_btc_bps);
  const double leftover = ((t * s.r_s_bps - b_bits) / (t * s.r_s_bps)) * delta_power_rx(s.r_s_bps, profile);
  return in_buffer + leftover + overflow_tail_energy(s, profile) / t;
}

double avg_power(const BurstScenario& s, const RadioProfile& profile) {
  s.validate();
  return s.fits() ? avg_power_fitting(s, profile) : avg_power_overflow(s, profile);
}

double optimal_interval(const RadioProfile& /*profile*/, double r_s_bps, double r_btc_bps, double buffer_b_bytes,
                        double t_max_s) {
  if (!(r_s_bps > 0.0) || !(r_btc_bps > 0.0) || !(t_max_s > 0.0) || !(buffer_b_bytes >= 0.0)) {
    throw DomainError("optimal_interval needs positive rates and T_max and a non-negative buffer");
  }
  return std::min(8.0 * buffer_b_bytes / r_s_bps, t_max_s);
}

std::vector<SurfaceRow> power_surface(const RadioProfile& profile, double r_btc_bps, std::span<const double> r_s_list,
                                      std::span<const double> t_list, std::span<const double> b_list) {
  if (r_s_list.empty() || t_list.empty() || b_list.empty()) throw DomainError("power surface grids must be non-empty");
  std::vector<SurfaceRow> rows;
  rows.reserve(r_s_list.size() * t_list.size() * b_list.size());
  for (double r_s : r_s_list) {
    for (double b : b_list) {
      for (double t : t_list) {
        const BurstScenario s{r_s, r_btc_bps, b, t};
        rows.push_back({profile.technology, r_s, b, t, avg_power(s, profile)});
      }
    }
  }
  return rows;
}

}  // namespace estreamer::energy
