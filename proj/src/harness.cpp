#include "estreamer/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "estreamer/energy_model.hpp"
#include "estreamer/errors.hpp"
#include "estreamer/profiler.hpp"

namespace estreamer::harness {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double settle_time(const RadioProfile& p) { return p.t1_s + p.t2_s + 1.0; }

client::ClientConfig client_config(const Scenario& sc) {
  return {sc.buffer_bytes, sc.startup_threshold_s, sc.segment_bytes, sc.bandwidth};
}

void finish_client(client::ClientSim& c, SessionResult& out) {
  c.end_of_stream();
  out.stalls = c.stall_log();
  out.content_bytes = c.delivered_bytes();
  for (const auto& s : out.activity) out.last_activity_s = std::max(out.last_activity_s, s.end_s);
}

SessionResult shaped_session(const Scenario& sc) {
  client::ClientSim c(client_config(sc));
  profiling::Profiler prof;
  shaping::Shaper sh(sc.stream, {sc.granularity_s, 2.0, sc.adaptive});
  SessionResult out;
  double content_s = 0.0;
  while (content_s < sc.session_s - 1e-9) {
    const auto plan = sh.next_burst();
    const double r = plan.quality_bps;
    const double bytes = std::min(plan.bytes, (sc.session_s - content_s) * r / 8.0);
    double start = c.now();
    // Just in time: the next burst leaves when the client's lead falls to the margin.
    if (plan.phase != shaping::Phase::FastStart && !plan.continuous && c.playing()) {
      start += std::max(0.0, c.buffered_content_s() - sc.margin_s);
    }
    const double seq0 = c.delivered_bytes();
    const auto res = c.deliver(bytes, kInf, start, r, plan.stop_on_zwa);
    prof.begin_burst(plan.burst_id, seq0, bytes, res.start_s);
    std::optional<profiling::BurstObservation> obs;
    for (const auto& a : res.acks) {
      if (auto o = prof.ingest(a)) obs = o;
    }
    if (!obs) obs = prof.finish();
    content_s += res.delivered_bytes * 8.0 / r;
    out.activity.insert(out.activity.end(), res.spans.begin(), res.spans.end());
    if (plan.phase == shaping::Phase::FastStart) out.fast_start_end_s = res.end_s;
    if (obs) {
      sh.on_burst_feedback(*obs);
      sh.on_bandwidth_change(obs->est_bandwidth_bps);
      const auto& st = sh.state();
      out.shaper_trace.push_back({plan.burst_id, res.start_s, st.phase, st.t_s, st.t_max_s, st.t_old_s,
                                  st.current_quality_index, obs->est_bandwidth_bps});
    }
    if (res.delivered_bytes < 1.0) c.advance(c.now() + sc.granularity_s);
  }
  finish_client(c, out);
  out.bursts = sh.log();
  out.final_state = sh.state();
  return out;
}

SessionResult baseline_session(const Scenario& sc) {
  client::ClientSim c(client_config(sc));
  shaping::Shaper sh(sc.stream, {sc.granularity_s, 2.0, sc.adaptive});
  const double r = sh.rate_bps();
  SessionResult out;
  const double total = sc.session_s * r / 8.0;
  const double fs = std::min(sh.fast_start_bytes(), total);
  const auto first = c.deliver(fs, kInf, 0.0, r);
  out.fast_start_end_s = first.end_s;
  out.activity = first.spans;
  if (total - fs > 0.0) {
    const auto rest = c.deliver(total - fs, r, c.now(), r);
    out.activity.insert(out.activity.end(), rest.spans.begin(), rest.spans.end());
  }
  finish_client(c, out);
  return out;
}

std::vector<radio::ActiveInterval> background_spans(const Scenario& sc, double until_s) {
  std::vector<radio::ActiveInterval> v;
  if (!sc.background) return v;
  const auto& bg = *sc.background;
  for (double t = bg.phase_s; t < until_s; t += bg.period_s) v.push_back({t, t + bg.bytes * 8.0 / bg.rate_bps, bg.bytes});
  return v;
}

radio::SignalingCostTable costs_for(const Scenario& sc) {
  return sc.costs.entries().empty() ? radio::SignalingCostTable::defaults(sc.profile.technology) : sc.costs;
}

void evaluate_radio(const Scenario& sc, SessionResult& s, double wall_end_s, double horizon_s) {
  auto spans = s.activity;
  const auto bg = background_spans(sc, wall_end_s);
  spans.insert(spans.end(), bg.begin(), bg.end());
  double last = 0.0;
  for (const auto& a : spans) last = std::max(last, a.end_s);
  const double h = std::max(horizon_s, last + settle_time(sc.profile));
  s.states = radio::simulate(std::move(spans), sc.profile, h);
  s.radio_energy_mj = radio::energy_of(s.states, sc.profile, 0.0);
  s.signaling = radio::signaling_of(s.states, costs_for(sc));
}

}  // namespace

void Scenario::validate() const {
  profile.validate();
  stream.validate();
  if (!(buffer_bytes > 0.0)) throw ConfigError(fmt::format("scenario '{}': buffer_bytes must be > 0", name));
  if (!(session_s > 0.0)) throw ConfigError(fmt::format("scenario '{}': session_s must be > 0", name));
  if (session_s > stream.duration_s) {
    throw ConfigError(fmt::format("scenario '{}': session ({} s) is longer than the stream ({} s)", name, session_s,
                                  stream.duration_s));
  }
  if (!(margin_s >= 0.0) || !(granularity_s > 0.0)) {
    throw ConfigError(fmt::format("scenario '{}': margin must be >= 0 and granularity > 0", name));
  }
  if (background && (!(background->period_s > 0.0) || !(background->rate_bps > 0.0) || background->bytes < 0.0)) {
    throw ConfigError(fmt::format("scenario '{}': background traffic needs a positive period and rate", name));
  }
}

SessionResult run_shaped(const Scenario& sc, double horizon_s) {
  sc.validate();
  auto s = shaped_session(sc);
  evaluate_radio(sc, s, s.last_activity_s, horizon_s);
  return s;
}

SessionResult run_baseline(const Scenario& sc, double horizon_s) {
  sc.validate();
  auto s = baseline_session(sc);
  evaluate_radio(sc, s, s.last_activity_s, horizon_s);
  return s;
}

RunResult run(const Scenario& sc) {
  sc.validate();
  RunResult r;
  r.shaped = shaped_session(sc);
  r.baseline = baseline_session(sc);
  const double wall_end = std::max(r.shaped.last_activity_s, r.baseline.last_activity_s);
  const double horizon = wall_end + settle_time(sc.profile) + (sc.background ? sc.background->bytes * 8.0 / sc.background->rate_bps : 0.0);
  evaluate_radio(sc, r.shaped, wall_end, horizon);
  evaluate_radio(sc, r.baseline, wall_end, horizon);
  r.energy_mj = r.shaped.radio_energy_mj;
  r.energy_baseline_mj = r.baseline.radio_energy_mj;
  r.savings_pct = r.energy_baseline_mj > 0.0 ? 100.0 * (1.0 - r.energy_mj / r.energy_baseline_mj) : 0.0;
  return r;
}

ProbeResult probe_burst(double buffer_bytes, double r_s_bps, double interval_s, double link_bps, double margin_s) {
  client::ClientSim c({buffer_bytes, margin_s, 1460.0, client::BandwidthTrace(link_bps)});
  c.deliver(margin_s * r_s_bps / 8.0, kInf, 0.0, r_s_bps);
  const auto res = c.deliver(interval_s * r_s_bps / 8.0, kInf, c.now(), r_s_bps, true);
  return {res.zwa, res.zwa ? res.delivered_at_first_zwa : res.delivered_bytes};
}

SearchOutcome run_search(double buffer_bytes, double r_s_bps, double t_max_s, double link_bps, double margin_s,
                         double granularity_s) {
  client::ClientSim c({buffer_bytes, margin_s, 1460.0, client::BandwidthTrace(link_bps)});
  c.deliver(margin_s * r_s_bps / 8.0, kInf, 0.0, r_s_bps);
  const double primed_at = c.now();
  shaping::StreamSpec spec{{{r_s_bps, 0.0, 0, 0}}, 1e9, 1.0};
  shaping::Shaper sh(spec, {granularity_s, 2.0, false});
  sh.begin_search(t_max_s);
  profiling::Profiler prof;
  SearchOutcome out;
  double content_s = 0.0;
  while (sh.state().phase == shaping::Phase::Searching) {
    const auto plan = sh.next_burst();
    const double start = std::max(c.now(), primed_at + content_s);
    const double seq0 = c.delivered_bytes();
    const auto res = c.deliver(plan.bytes, kInf, start, r_s_bps, plan.stop_on_zwa);
    prof.begin_burst(plan.burst_id, seq0, plan.bytes, res.start_s);
    std::optional<profiling::BurstObservation> obs;
    for (const auto& a : res.acks) {
      if (auto o = prof.ingest(a)) obs = o;
    }
    if (!obs) obs = prof.finish();
    if (!obs) throw Error("search burst was not acknowledged");
    content_s += res.delivered_bytes * 8.0 / r_s_bps;
    out.zwa = obs->zwa_seen;
    sh.on_burst_feedback(*obs);
  }
  out.bs_opt_bytes = *sh.state().bs_opt_bytes;
  out.t_opt_s = sh.state().t_s;
  out.rounds = sh.search_rounds();
  out.probes = sh.probes();
  return out;
}

std::vector<CompareRow> compare_configs(const Scenario& sc, const std::vector<RadioProfile>& profiles) {
  if (profiles.size() < 2) throw PreconditionError("compare needs at least two profiles");
  std::vector<CompareRow> rows;
  for (const auto& p : profiles) {
    Scenario s = sc;
    s.profile = p;
    if (p.technology != sc.profile.technology) s.costs = {};
    const auto r = run(s);
    rows.push_back({p.name, r.energy_mj, r.energy_baseline_mj, r.savings_pct, r.shaped.signaling.per_minute,
                    r.shaped.signaling.transitions});
  }
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out = "profile,energy_mj,baseline_mj,savings_pct,signaling_per_min,transitions\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{}\n", r.profile, r.energy_mj, r.energy_baseline_mj, r.savings_pct,
                       r.signaling_per_minute, r.transitions);
  }
  return out;
}

std::string surface_csv(const RadioProfile& profile, double r_btc_bps, const std::vector<double>& r_s_list,
                        const std::vector<double>& t_list, const std::vector<double>& b_list) {
  std::string out = "technology,r_s_bps,buffer_bytes,interval_s,avg_power_mw\n";
  for (const auto& row : energy::power_surface(profile, r_btc_bps, r_s_list, t_list, b_list)) {
    out += fmt::format("{},{},{},{},{}\n", to_string(row.technology), row.r_s_bps, row.buffer_bytes, row.interval_s,
                       row.avg_power_mw);
  }
  return out;
}

std::string summary_csv(const RunResult& r) {
  std::string out = "metric,value\n";
  out += fmt::format("energy_mj,{}\n", r.energy_mj);
  out += fmt::format("energy_baseline_mj,{}\n", r.energy_baseline_mj);
  out += fmt::format("savings_pct,{}\n", r.savings_pct);
  out += fmt::format("stalls,{}\n", r.shaped.stalls.size());
  out += fmt::format("bursts,{}\n", r.shaped.bursts.size());
  out += fmt::format("signaling_per_min,{}\n", r.shaped.signaling.per_minute);
  out += fmt::format("baseline_signaling_per_min,{}\n", r.baseline.signaling.per_minute);
  out += fmt::format("transitions,{}\n", r.shaped.signaling.transitions);
  if (r.shaped.final_state) {
    const auto& st = *r.shaped.final_state;
    out += fmt::format("final_phase,{}\n", shaping::to_string(st.phase));
    out += fmt::format("final_T_s,{}\n", st.t_s);
    out += fmt::format("final_T_max_s,{}\n", st.t_max_s);
    out += fmt::format("bs_opt_bytes,{}\n", st.bs_opt_bytes ? fmt::format("{}", *st.bs_opt_bytes) : std::string());
  }
  return out;
}

std::string shaper_trace_csv(const std::vector<ShaperTraceRow>& rows) {
  std::string out = "burst_id,send_s,phase,T_s,T_max_s,T_old_s,quality_index,est_bps\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.burst_id, r.send_s, shaping::to_string(r.phase), r.t_s,
                       r.t_max_s, r.t_old_s ? fmt::format("{}", *r.t_old_s) : std::string(), r.quality_index,
                       r.est_bandwidth_bps);
  }
  return out;
}

}  // namespace estreamer::harness
