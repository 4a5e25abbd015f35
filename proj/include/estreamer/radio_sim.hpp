#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "estreamer/radio_profile.hpp"

// RRC / PSM state machine driven by a packet-activity timeline.

namespace estreamer::radio {

enum class RrcState { Dch, Fach, Pch, Idle, Connected, DrxOn, DrxOff };

std::string_view to_string(RrcState s);
RrcState parse_rrc_state(std::string_view s);

/// DRX sub-states collapse onto CONNECTED for signaling purposes.
RrcState rrc_level(RrcState s);

enum class ActivityKind { RxStart, RxEnd, TxStart, TxEnd };

struct ActivityEvent {
  double time_s = 0.0;
  ActivityKind kind = ActivityKind::RxStart;
  std::optional<double> bytes;
};

/// Ordered START/END event list. Each direction must be properly paired and
/// non-nested.
class ActivityTrace {
 public:
  void add(const ActivityEvent& e) { events_.push_back(e); }
  void add_rx(double start_s, double end_s, std::optional<double> bytes = std::nullopt);
  void add_tx(double start_s, double end_s, std::optional<double> bytes = std::nullopt);

  const std::vector<ActivityEvent>& events() const { return events_; }
  bool empty() const { return events_.empty(); }

  /// Throws OrderingError on decreasing times and PreconditionError on bad pairing.
  void validate() const;

 private:
  std::vector<ActivityEvent> events_;
};

/// A span during which the radio moves data. `bytes` is zero when unknown.
struct ActiveInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  double bytes = 0.0;
};

/// Union of the rx and tx spans of a validated trace, sorted.
std::vector<ActiveInterval> activity_intervals(const ActivityTrace& trace);
/// Sorts and unions overlapping intervals; bytes of merged spans add up.
/// Spans that merely touch stay separate so their rates survive.
std::vector<ActiveInterval> merge_intervals(std::vector<ActiveInterval> spans);

struct StateSegment {
  double start_s = 0.0;
  double end_s = 0.0;
  RrcState state = RrcState::Idle;
  bool active = false;
  double rx_rate_bps = 0.0;  ///< active segments only; zero when unknown
  double power_mw = 0.0;

  double duration() const { return end_s - start_s; }
};

struct StateTrace {
  std::vector<StateSegment> segments;
  double horizon_s = 0.0;

  /// Header `start_s,end_s,state,power_mw`.
  std::string to_csv() const;
};

/// Runs the state machine from IDLE at t = 0 up to `horizon_s` (extended if a
/// DRX-delayed reception finishes later). Throws PreconditionError when the
/// horizon ends before the last activity.
StateTrace simulate(const ActivityTrace& trace, const RadioProfile& profile, double horizon_s);
StateTrace simulate(std::vector<ActiveInterval> spans, const RadioProfile& profile, double horizon_s);

/// Power of a non-active state. Throws ConfigError when the profile lacks it.
double state_power(RrcState s, const RadioProfile& profile);

/// Total radio energy. Active segments without a known rate use `rx_rate_bps`.
/// Includes the profile's promotion energy per IDLE -> connected transition.
double energy_of(const StateTrace& trace, const RadioProfile& profile, double rx_rate_bps);
/// Energy of the non-active segments inside [from_s, to_s).
double tail_energy_of(const StateTrace& trace, const RadioProfile& profile, double from_s, double to_s);
/// Number of IDLE -> connected promotions.
std::int64_t promotion_count(const StateTrace& trace);

using Transition = std::pair<RrcState, RrcState>;

class SignalingCostTable {
 public:
  SignalingCostTable() = default;
  explicit SignalingCostTable(std::map<Transition, double> costs);

  /// Ships every transition the simulator can emit for `tech`.
  static SignalingCostTable defaults(Technology tech);

  void set(RrcState from, RrcState to, double cost);
  /// Throws ConfigError when the transition has no configured cost.
  double cost(RrcState from, RrcState to) const;
  const std::map<Transition, double>& entries() const { return costs_; }

  /// Throws ConfigError unless each reconnect transition (from IDLE) costs
  /// strictly more than every intra-connected one.
  void validate() const;

 private:
  std::map<Transition, double> costs_;
};

struct LedgerRow {
  RrcState from;
  RrcState to;
  std::int64_t count;
  double cost;
  double total;
};

struct SignalingLedger {
  std::vector<LedgerRow> rows;  ///< sorted by (from, to)
  std::int64_t transitions = 0;
  double total_messages = 0.0;
  double per_minute = 0.0;  ///< messages per minute over the trace horizon

  std::int64_t count(RrcState from, RrcState to) const;
  /// Header `from,to,count,cost,total`.
  std::string to_csv() const;
};

/// RRC-level transition counts of a trace.
std::map<Transition, std::int64_t> transition_counts(const StateTrace& trace);
SignalingLedger signaling_of(const StateTrace& trace, const SignalingCostTable& costs);

}  // namespace estreamer::radio
