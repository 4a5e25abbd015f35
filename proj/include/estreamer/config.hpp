#pragma once

#include <string>

#include "estreamer/harness.hpp"
#include "estreamer/radio_profile.hpp"

// INI loaders for radio profiles and scenarios.
//
// Profile file:
//   [profile]  name technology t1_s t2_s t3_s p1_mw p2_mw p_tail_mw a_coeff
//              k_coeff pch_enabled fast_dormancy fd_timeout_s pch_mw idle_mw
//              drx_off_mw promotion_energy_mj
//   [drx]      idle_ms cycle_ms on_ms   (optional)
//
// Scenario file:
//   [scenario]   name profile buffer_bytes session_s startup_threshold_s
//                margin_s granularity_s adaptive segment_bytes output_dir
//   [stream]     bitrates_bps duration_s fast_start_seconds
//   [bandwidth]  steps = "t:bps t:bps ..."
//   [background] period_s bytes phase_s rate_bps   (optional)
//   [signaling]  FROM->TO = messages  (optional, overrides single defaults)
//
// A relative profile path is resolved against the scenario file's directory.

namespace estreamer::config {

RadioProfile load_profile(const std::string& path);
RadioProfile parse_profile(const std::string& ini_text, const std::string& origin = "<string>");
std::string render_profile(const RadioProfile& p);

harness::Scenario load_scenario(const std::string& path);
/// `base_dir` resolves a relative profile reference.
harness::Scenario parse_scenario(const std::string& ini_text, const std::string& base_dir,
                                 const std::string& origin = "<string>");

}  // namespace estreamer::config
