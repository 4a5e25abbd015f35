#pragma once

#include <optional>
#include <string>
#include <vector>

#include "estreamer/client_sim.hpp"
#include "estreamer/radio_profile.hpp"
#include "estreamer/radio_sim.hpp"
#include "estreamer/shaper.hpp"

// End-to-end sessions: client, profiler and shaper in a loop, the resulting
// radio activity through the state machine.

namespace estreamer::harness {

/// Periodic cross traffic on the same radio.
struct BackgroundTraffic {
  double period_s = 60.0;
  double bytes = 20000.0;
  double phase_s = 0.0;
  double rate_bps = 1e6;
};

struct Scenario {
  std::string name;
  RadioProfile profile;
  shaping::StreamSpec stream;
  double buffer_bytes = 0.0;
  client::BandwidthTrace bandwidth{1e6};
  std::optional<BackgroundTraffic> background;
  double session_s = 0.0;  ///< content seconds streamed
  double startup_threshold_s = 2.0;
  double margin_s = 2.0;  ///< client lead at which the next burst goes out
  double granularity_s = 1.0;
  bool adaptive = false;
  double segment_bytes = 1460.0;
  radio::SignalingCostTable costs;
  std::string output_dir;

  /// Throws ConfigError on inconsistent fields.
  void validate() const;
};

/// Shaper bookkeeping after each burst.
struct ShaperTraceRow {
  std::uint64_t burst_id;
  double send_s;
  shaping::Phase phase;
  double t_s;
  double t_max_s;
  std::optional<double> t_old_s;
  std::size_t quality_index;
  double est_bandwidth_bps;
};

struct SessionResult {
  double radio_energy_mj = 0.0;
  radio::StateTrace states;
  radio::SignalingLedger signaling;
  std::vector<client::Stall> stalls;
  std::vector<shaping::BurstLogRow> bursts;
  std::vector<ShaperTraceRow> shaper_trace;
  std::vector<radio::ActiveInterval> activity;
  double content_bytes = 0.0;
  double fast_start_end_s = 0.0;
  double last_activity_s = 0.0;
  std::optional<shaping::ShaperState> final_state;
};

struct RunResult {
  SessionResult shaped;
  SessionResult baseline;
  double energy_mj = 0.0;
  double energy_baseline_mj = 0.0;
  double savings_pct = 0.0;
};

/// Full shaping loop. The radio is evaluated up to `horizon_s` (0 = own activity plus the timers).
SessionResult run_shaped(const Scenario& sc, double horizon_s = 0.0);
/// Same Fast Start, then paced at the encoding rate.
SessionResult run_baseline(const Scenario& sc, double horizon_s = 0.0);
/// Both runs over a common horizon; savings = 1 - shaped/baseline on radio energy.
RunResult run(const Scenario& sc);

struct SearchOutcome {
  double bs_opt_bytes = 0.0;
  double t_opt_s = 0.0;
  bool zwa = false;
  std::uint64_t rounds = 0;
  std::vector<double> probes;
};

/// Interval search in isolation against a client that holds `margin_s` of
/// content at every burst.
SearchOutcome run_search(double buffer_bytes, double r_s_bps, double t_max_s, double link_bps, double margin_s,
                         double granularity_s = 1.0);

/// Bytes a client primed with `margin_s` of content accepts from one burst of
/// `interval_s` before flow control, or the full burst when it fits.
struct ProbeResult {
  bool zwa;
  double accepted_bytes;
};
ProbeResult probe_burst(double buffer_bytes, double r_s_bps, double interval_s, double link_bps, double margin_s);

struct CompareRow {
  std::string profile;
  double energy_mj;
  double energy_baseline_mj;
  double savings_pct;
  double signaling_per_minute;
  std::int64_t transitions;
};

std::vector<CompareRow> compare_configs(const Scenario& sc, const std::vector<RadioProfile>& profiles);
/// Header `profile,energy_mj,baseline_mj,savings_pct,signaling_per_min,transitions`.
std::string compare_csv(const std::vector<CompareRow>& rows);

/// Header `technology,r_s_bps,buffer_bytes,interval_s,avg_power_mw`.
std::string surface_csv(const RadioProfile& profile, double r_btc_bps, const std::vector<double>& r_s_list,
                        const std::vector<double>& t_list, const std::vector<double>& b_list);

/// Header `metric,value`.
std::string summary_csv(const RunResult& r);

/// Header `burst_id,send_s,phase,T_s,T_max_s,T_old_s,quality_index,est_bps`.
std::string shaper_trace_csv(const std::vector<ShaperTraceRow>& rows);

}  // namespace estreamer::harness
