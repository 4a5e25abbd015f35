#include "estreamer/radio_sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "estreamer/energy_model.hpp"
#include "estreamer/errors.hpp"

namespace estreamer::radio {

namespace {

constexpr std::array<std::pair<RrcState, std::string_view>, 7> kStateNames{{
    {RrcState::Dch, "DCH"},
    {RrcState::Fach, "FACH"},
    {RrcState::Pch, "PCH"},
    {RrcState::Idle, "IDLE"},
    {RrcState::Connected, "CONNECTED"},
    {RrcState::DrxOn, "CONN_DRX_ON"},
    {RrcState::DrxOff, "CONN_DRX_OFF"},
}};

using Schedule = std::vector<std::pair<double, RrcState>>;

RrcState active_state(const RadioProfile& p) { return p.technology == Technology::Hspa ? RrcState::Dch : RrcState::Connected; }

// Demotion steps relative to the end of activity, DRX cycling excluded.
Schedule demotion_schedule(const RadioProfile& p) {
  Schedule s;
  double settle = 0.0;
  if (p.technology == Technology::Hspa) {
    const RrcState after_t2 = p.pch_enabled ? RrcState::Pch : RrcState::Idle;
    s = {{0.0, RrcState::Dch}, {p.t1_s, RrcState::Fach}, {p.t1_s + p.t2_s, after_t2}};
    if (p.pch_enabled) s.push_back({p.t1_s + p.t2_s + p.t3_s, RrcState::Idle});
    settle = p.t1_s + p.t2_s;
  } else {
    s = {{0.0, RrcState::Connected}, {p.t1_s, RrcState::Idle}};
    settle = p.t1_s;
  }
  const double tau = p.legacy_fd_timeout_s;
  if (p.fast_dormancy != FastDormancy::None && tau < settle) {
    std::erase_if(s, [tau](const auto& e) { return e.first >= tau; });
    const bool to_pch =
        p.fast_dormancy == FastDormancy::Rel8 && p.technology == Technology::Hspa && p.pch_enabled;
    s.push_back({tau, to_pch ? RrcState::Pch : RrcState::Idle});
    if (to_pch) s.push_back({tau + p.t3_s, RrcState::Idle});
  }
  return s;
}

// Expands the schedule (plus DRX cycling) into the transitions that happen
// strictly before `limit` seconds after the activity ended.
Schedule gap_transitions(const RadioProfile& p, const Schedule& base, double limit) {
  Schedule out;
  auto push = [&out](double off, RrcState st) {
    if (!out.empty() && out.back().first == off) out.pop_back();
    if (!out.empty() && out.back().second == st) return;
    out.push_back({off, st});
  };
  // DRX cycles run between the DRX inactivity timer and the first demotion out of CONNECTED.
  double drx_begin = 0.0, drx_end = 0.0;
  if (p.drx) {
    drx_begin = p.drx->idle_ms / 1000.0;
    drx_end = base.size() > 1 ? base[1].first : drx_begin;
  }
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (!(base[i].first < limit)) break;
    push(base[i].first, base[i].second);
    if (i == 0 && p.drx && drx_begin < drx_end) {
      const double cycle = p.drx->cycle_ms / 1000.0;
      const double on = p.drx->on_ms / 1000.0;
      const double stop = std::min(drx_end, limit);
      for (std::int64_t k = 0;; ++k) {
        const double on_at = drx_begin + static_cast<double>(k) * cycle;
        if (!(on_at < stop)) break;
        push(on_at, RrcState::DrxOn);
        const double off_at = on_at + on;
        if (!(off_at < stop)) break;
        if (on < cycle) push(off_at, RrcState::DrxOff);
      }
    }
  }
  return out;
}

class Builder {
 public:
  explicit Builder(const RadioProfile& p) : profile_(p) {}

  void idle_state(double start, double end, RrcState st) {
    // A missing state power surfaces later, in energy_of.
    double power = std::numeric_limits<double>::quiet_NaN();
    try {
      power = state_power(st, profile_);
    } catch (const ConfigError&) {
    }
    append({start, end, st, false, 0.0, power});
  }

  void active(double start, double end, double bytes) {
    const double dur = end - start;
    const double rate = (bytes > 0.0 && dur > 0.0) ? bytes * 8.0 / dur : 0.0;
    append({start, end, active_state(profile_), true, rate, energy::power_rx(rate, profile_)});
  }

  std::vector<StateSegment> take() { return std::move(segs_); }

 private:
  void append(StateSegment s) {
    if (!(s.end_s > s.start_s)) return;
    segs_.push_back(s);
  }

  const RadioProfile& profile_;
  std::vector<StateSegment> segs_;
};

// Emits the gap [from, to) after activity ended at `from`.
void emit_gap(Builder& b, const RadioProfile& p, const Schedule& base, double from, double to) {
  const auto steps = gap_transitions(p, base, to - from);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double start = from + steps[i].first;
    const double end = i + 1 < steps.size() ? from + steps[i + 1].first : to;
    b.idle_state(start, end, steps[i].second);
  }
}

}  // namespace

std::string_view to_string(RrcState s) {
  for (const auto& [st, name] : kStateNames) {
    if (st == s) return name;
  }
  return "?";
}

RrcState parse_rrc_state(std::string_view s) {
  for (const auto& [st, name] : kStateNames) {
    if (name == s) return st;
  }
  throw ConfigError(fmt::format("unknown RRC state '{}'", s));
}

RrcState rrc_level(RrcState s) {
  return (s == RrcState::DrxOn || s == RrcState::DrxOff) ? RrcState::Connected : s;
}

void ActivityTrace::add_rx(double start_s, double end_s, std::optional<double> bytes) {
  events_.push_back({start_s, ActivityKind::RxStart, std::nullopt});
  events_.push_back({end_s, ActivityKind::RxEnd, bytes});
}

void ActivityTrace::add_tx(double start_s, double end_s, std::optional<double> bytes) {
  events_.push_back({start_s, ActivityKind::TxStart, std::nullopt});
  events_.push_back({end_s, ActivityKind::TxEnd, bytes});
}

void ActivityTrace::validate() const {
  bool rx_open = false, tx_open = false;
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& e : events_) {
    if (!std::isfinite(e.time_s) || e.time_s < 0.0) {
      throw PreconditionError(fmt::format("activity time must be finite and >= 0 (got {})", e.time_s));
    }
    if (e.time_s < prev) throw OrderingError(fmt::format("activity at {} s precedes {} s", e.time_s, prev));
    prev = e.time_s;
    bool& open = (e.kind == ActivityKind::RxStart || e.kind == ActivityKind::RxEnd) ? rx_open : tx_open;
    const bool is_start = e.kind == ActivityKind::RxStart || e.kind == ActivityKind::TxStart;
    if (is_start == open) {
      throw PreconditionError(fmt::format("unpaired or nested activity event at {} s", e.time_s));
    }
    open = is_start;
  }
  if (rx_open || tx_open) throw PreconditionError("activity trace ends inside an open interval");
}

std::vector<ActiveInterval> activity_intervals(const ActivityTrace& trace) {
  trace.validate();
  std::vector<ActiveInterval> spans;
  double rx_start = 0.0, tx_start = 0.0;
  for (const auto& e : trace.events()) {
    switch (e.kind) {
      case ActivityKind::RxStart:
        rx_start = e.time_s;
        break;
      case ActivityKind::TxStart:
        tx_start = e.time_s;
        break;
      case ActivityKind::RxEnd:
        spans.push_back({rx_start, e.time_s, e.bytes.value_or(0.0)});
        break;
      case ActivityKind::TxEnd:
        // Uplink bytes do not count toward the receive rate.
        spans.push_back({tx_start, e.time_s, 0.0});
        break;
    }
  }
  return merge_intervals(std::move(spans));
}

std::vector<ActiveInterval> merge_intervals(std::vector<ActiveInterval> spans) {
  for (const auto& s : spans) {
    if (!(s.end_s >= s.start_s) || !(s.start_s >= 0.0)) {
      throw PreconditionError(fmt::format("bad activity interval [{}, {}]", s.start_s, s.end_s));
    }
  }
  std::stable_sort(spans.begin(), spans.end(),
                   [](const ActiveInterval& a, const ActiveInterval& b) { return a.start_s < b.start_s; });
  std::vector<ActiveInterval> out;
  for (const auto& s : spans) {
    if (!out.empty() && s.start_s < out.back().end_s) {
      out.back().end_s = std::max(out.back().end_s, s.end_s);
      out.back().bytes += s.bytes;
    } else {
      out.push_back(s);
    }
  }
  return out;
}

StateTrace simulate(const ActivityTrace& trace, const RadioProfile& profile, double horizon_s) {
  return simulate(activity_intervals(trace), profile, horizon_s);
}

StateTrace simulate(std::vector<ActiveInterval> spans, const RadioProfile& profile, double horizon_s) {
  profile.validate();
  spans = merge_intervals(std::move(spans));
  if (!spans.empty() && spans.back().end_s > horizon_s) {
    throw PreconditionError(
        fmt::format("horizon {} s ends before the last activity ({} s)", horizon_s, spans.back().end_s));
  }
  const Schedule base = demotion_schedule(profile);
  Builder b(profile);

  bool seen = false;
  double last_end = 0.0;
  std::size_t i = 0;
  while (i < spans.size()) {
    ActiveInterval cur = spans[i++];
    if (!seen) {
      b.idle_state(0.0, cur.start_s, RrcState::Idle);
    } else {
      double start = cur.start_s;
      const auto steps = gap_transitions(profile, base, start - last_end);
      if (!steps.empty() && steps.back().second == RrcState::DrxOff) {
        // Receptions wait for the next on-duration (or the RRC timer, whichever is first).
        const double d = profile.drx->idle_ms / 1000.0;
        const double c = profile.drx->cycle_ms / 1000.0;
        const double k = std::floor((start - last_end - d) / c);
        const double next_on = last_end + d + (k + 1.0) * c;
        const double shifted = std::max(start, std::min(next_on, last_end + profile.t1_s));
        const double delay = shifted - start;
        cur.start_s += delay;
        cur.end_s += delay;
        while (i < spans.size() && spans[i].start_s <= cur.end_s) {
          cur.end_s = std::max(cur.end_s, spans[i].end_s);
          cur.bytes += spans[i].bytes;
          ++i;
        }
      }
      emit_gap(b, profile, base, last_end, cur.start_s);
    }
    b.active(cur.start_s, cur.end_s, cur.bytes);
    seen = true;
    last_end = cur.end_s;
  }

  StateTrace out;
  out.horizon_s = std::max(horizon_s, last_end);
  if (!seen) {
    b.idle_state(0.0, out.horizon_s, RrcState::Idle);
  } else {
    emit_gap(b, profile, base, last_end, out.horizon_s);
  }
  out.segments = b.take();
  return out;
}

double state_power(RrcState s, const RadioProfile& p) {
  switch (s) {
    case RrcState::Dch:
    case RrcState::Connected:
    case RrcState::DrxOn:
      return p.require_p1();
    case RrcState::Fach:
      return p.require_p2();
    case RrcState::Pch:
      return p.pch_mw;
    case RrcState::Idle:
      return p.idle_mw;
    case RrcState::DrxOff:
      return p.drx_off_mw;
  }
  throw ConfigError("unknown RRC state");
}

double energy_of(const StateTrace& trace, const RadioProfile& profile, double rx_rate_bps) {
  double e = 0.0;
  for (const auto& s : trace.segments) {
    if (s.active) {
      const double rate = s.rx_rate_bps > 0.0 ? s.rx_rate_bps : rx_rate_bps;
      e += energy::power_rx(rate, profile) * s.duration();
    } else {
      e += state_power(s.state, profile) * s.duration();
    }
  }
  return e + profile.promotion_energy_mj * static_cast<double>(promotion_count(trace));
}

double tail_energy_of(const StateTrace& trace, const RadioProfile& profile, double from_s, double to_s) {
  double e = 0.0;
  for (const auto& s : trace.segments) {
    if (s.active) continue;
    const double overlap = std::min(s.end_s, to_s) - std::max(s.start_s, from_s);
    if (overlap > 0.0) e += state_power(s.state, profile) * overlap;
  }
  return e;
}

std::int64_t promotion_count(const StateTrace& trace) {
  std::int64_t n = 0;
  for (const auto& [t, c] : transition_counts(trace)) {
    if (t.first == RrcState::Idle) n += c;
  }
  return n;
}

std::string StateTrace::to_csv() const {
  std::string out = "start_s,end_s,state,power_mw\n";
  for (const auto& s : segments) {
    out += fmt::format("{},{},{},{}\n", s.start_s, s.end_s, to_string(s.state), s.power_mw);
  }
  return out;
}

SignalingCostTable::SignalingCostTable(std::map<Transition, double> costs) : costs_(std::move(costs)) {}

SignalingCostTable SignalingCostTable::defaults(Technology tech) {
  using S = RrcState;
  switch (tech) {
    case Technology::Hspa:
      return SignalingCostTable({
          {{S::Idle, S::Dch}, 30},
          {{S::Dch, S::Fach}, 3},
          {{S::Fach, S::Dch}, 4},
          {{S::Pch, S::Dch}, 6},
          {{S::Fach, S::Pch}, 3},
          {{S::Dch, S::Pch}, 4},
          {{S::Dch, S::Idle}, 4},
          {{S::Fach, S::Idle}, 4},
          {{S::Pch, S::Idle}, 2},
      });
    case Technology::Lte:
      return SignalingCostTable({{{S::Idle, S::Connected}, 15}, {{S::Connected, S::Idle}, 3}});
    case Technology::Wifi:
      return SignalingCostTable({{{S::Idle, S::Connected}, 0}, {{S::Connected, S::Idle}, 0}});
  }
  throw ConfigError("unknown technology");
}

void SignalingCostTable::set(RrcState from, RrcState to, double cost) {
  if (!(cost >= 0.0)) throw ConfigError(fmt::format("signaling cost must be >= 0 (got {})", cost));
  costs_[{rrc_level(from), rrc_level(to)}] = cost;
}

double SignalingCostTable::cost(RrcState from, RrcState to) const {
  const auto it = costs_.find({rrc_level(from), rrc_level(to)});
  if (it == costs_.end()) {
    throw ConfigError(fmt::format("no signaling cost configured for {} -> {}", to_string(from), to_string(to)));
  }
  return it->second;
}

void SignalingCostTable::validate() const {
  double max_intra = -1.0;
  for (const auto& [t, c] : costs_) {
    if (t.first != RrcState::Idle && t.second != RrcState::Idle) max_intra = std::max(max_intra, c);
  }
  for (const auto& [t, c] : costs_) {
    if (t.first == RrcState::Idle && !(c > max_intra)) {
      throw ConfigError(fmt::format("reconnect {} -> {} costs {} but an intra-connected transition costs {}",
                                    to_string(t.first), to_string(t.second), c, max_intra));
    }
  }
}

std::map<Transition, std::int64_t> transition_counts(const StateTrace& trace) {
  std::map<Transition, std::int64_t> counts;
  // Every trace starts from IDLE.
  RrcState prev = RrcState::Idle;
  for (const auto& s : trace.segments) {
    const RrcState level = rrc_level(s.state);
    if (prev != level) ++counts[{prev, level}];
    prev = level;
  }
  return counts;
}

std::int64_t SignalingLedger::count(RrcState from, RrcState to) const {
  for (const auto& r : rows) {
    if (r.from == from && r.to == to) return r.count;
  }
  return 0;
}

std::string SignalingLedger::to_csv() const {
  std::string out = "from,to,count,cost,total\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{}\n", to_string(r.from), to_string(r.to), r.count, r.cost, r.total);
  }
  return out;
}

SignalingLedger signaling_of(const StateTrace& trace, const SignalingCostTable& costs) {
  SignalingLedger ledger;
  for (const auto& [t, n] : transition_counts(trace)) {
    const double c = costs.cost(t.first, t.second);
    ledger.rows.push_back({t.first, t.second, n, c, c * static_cast<double>(n)});
    ledger.transitions += n;
    ledger.total_messages += c * static_cast<double>(n);
  }
  ledger.per_minute = trace.horizon_s > 0.0 ? ledger.total_messages * 60.0 / trace.horizon_s : 0.0;
  return ledger;
}

}  // namespace estreamer::radio
