#pragma once

#include "estreamer/radio_profile.hpp"

// Built-in radio profiles. The shipped files under profiles/ carry the same
// values; a unit test keeps the two in sync.

namespace estreamer::presets {

/// Wi-Fi with a 0.2 s PSM timer and 435 mW idle power. The receive model
/// interpolates linearly from 435 mW above tail power at zero rate to 760 mW
/// at 20 Mbit/s.
RadioProfile wifi_analysis();
/// LTE without DRX, 10 s inactivity timer, 1216 mW tail power and a flat
/// 1520 mW receive increment.
RadioProfile lte_analysis();

// Network configurations used in the HSPA/LTE evaluation runs.
RadioProfile hspa_default();
RadioProfile hspa_aggressive();
RadioProfile hspa_no_pch();
RadioProfile lte_no_drx();
RadioProfile lte_drx();
RadioProfile lte_drx_long_idle();

/// Same network, device applying legacy fast dormancy after `timeout_s`.
RadioProfile with_legacy_fd(RadioProfile base, double timeout_s = 6.5);
/// Same network, device applying Rel-8 fast dormancy after `timeout_s`.
RadioProfile with_rel8_fd(RadioProfile base, double timeout_s);

/// Bulk transfer capacities paired with the analysis profiles.
inline constexpr double kWifiBulkRateBps = 20e6;
inline constexpr double kLteBulkRateBps = 16e6;

}  // namespace estreamer::presets
