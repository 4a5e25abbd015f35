#include "estreamer/shaper.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "estreamer/errors.hpp"

namespace estreamer::shaping {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::FastStart:
      return "FAST_START";
    case Phase::Searching:
      return "SEARCHING";
    case Phase::Steady:
      return "STEADY";
    case Phase::LowBandwidth:
      return "LOW_BANDWIDTH";
  }
  return "?";
}

void StreamSpec::validate() const {
  if (qualities.empty()) throw ConfigError("stream needs at least one quality");
  for (std::size_t i = 0; i < qualities.size(); ++i) {
    if (!(qualities[i].bitrate_bps > 0.0)) throw ConfigError("quality bitrates must be > 0");
    if (i > 0 && !(qualities[i].bitrate_bps > qualities[i - 1].bitrate_bps)) {
      throw ConfigError("quality bitrates must strictly increase");
    }
  }
  if (!(duration_s > 0.0)) throw ConfigError("stream duration must be > 0");
  if (!(fast_start_seconds > 0.0)) throw ConfigError("fast start must be > 0 s");
}

std::vector<double> StreamSpec::ladder() const {
  std::vector<double> v;
  for (const auto& q : qualities) v.push_back(q.bitrate_bps);
  return v;
}

std::string burst_log_csv(const std::vector<BurstLogRow>& rows) {
  std::string out = "burst_id,quality_bps,T_s,bytes,zwa,bs_opt_bytes,phase\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", r.burst_id, r.quality_bps, r.t_s, r.bytes, r.zwa ? 1 : 0,
                       r.bs_opt_bytes ? fmt::format("{}", *r.bs_opt_bytes) : std::string(), to_string(r.phase));
  }
  return out;
}

Shaper::Shaper(StreamSpec spec, ShaperConfig config, std::shared_ptr<const QualityPolicy> policy)
    : spec_(std::move(spec)), config_(config), policy_(std::move(policy)) {
  spec_.validate();
  if (!(config_.granularity_s > 0.0)) throw ConfigError("granularity must be > 0");
  if (!policy_) policy_ = std::make_shared<TwiceRatePolicy>();
  state_.current_quality_index = config_.adaptive ? policy_->initial(spec_.ladder()) : 0;
}

double Shaper::rate_bps() const { return rate_of(state_.current_quality_index); }

double Shaper::fast_start_bytes() const { return spec_.fast_start_seconds * rate_bps() / 8.0; }

BurstPlan Shaper::next_burst() {
  BurstPlan p;
  p.burst_id = next_id_++;
  p.quality_index = state_.current_quality_index;
  p.quality_bps = rate_bps();
  p.phase = state_.phase;
  switch (state_.phase) {
    case Phase::FastStart:
      p.bytes = fast_start_bytes();
      p.interval_s = spec_.fast_start_seconds;
      p.stop_on_zwa = true;
      break;
    case Phase::Searching:
      p.interval_s = state_.t_s;
      p.bytes = state_.t_s * p.quality_bps / 8.0;
      p.stop_on_zwa = true;
      probes_.push_back(state_.t_s);
      break;
    case Phase::Steady:
      p.bytes = state_.bs_opt_bytes.value_or(state_.t_s * p.quality_bps / 8.0);
      p.interval_s = p.bytes * 8.0 / p.quality_bps;
      break;
    case Phase::LowBandwidth:
      p.interval_s = config_.granularity_s;
      p.bytes = config_.granularity_s * p.quality_bps / 8.0;
      p.continuous = true;
      break;
  }
  pending_ = p;
  return p;
}

void Shaper::set_steady(double bs_opt_bytes) {
  state_.bs_opt_bytes = bs_opt_bytes;
  state_.t_s = bs_opt_bytes * 8.0 / rate_bps();
  state_.phase = Phase::Steady;
}

double Shaper::end_fast_start(double sent_bytes) {
  if (!(sent_bytes > 0.0)) throw DomainError("fast start must have sent some bytes");
  const double t_max = sent_bytes * 8.0 / rate_bps();
  if (config_.adaptive) {
    // The whole Fast Start fit: it is the largest known burst for this quality.
    state_.t_max_s = t_max;
    state_.t_min_s = t_max;
    set_steady(sent_bytes);
    propagate_bs_opt(state_.current_quality_index, sent_bytes, false);
  } else {
    begin_search(t_max);
  }
  return t_max;
}

void Shaper::begin_search(double t_max_s) {
  if (!(t_max_s > 0.0)) throw DomainError("T_max must be > 0");
  state_.phase = Phase::Searching;
  state_.t_max_s = t_max_s;
  state_.t_min_s = 0.0;
  state_.t_s = t_max_s / 2.0;
  state_.bs_opt_bytes.reset();
  search_rounds_ = 0;
  probes_.clear();
}

Action Shaper::on_burst_feedback(const profiling::BurstObservation& obs) {
  if (!pending_ || obs.burst_id != pending_->burst_id) {
    ++warnings_;
    spdlog::warn("ignoring feedback for burst {} (expecting {})", obs.burst_id,
                 pending_ ? fmt::format("{}", pending_->burst_id) : std::string("none"));
    return {Action::Kind::Ignored, state_.t_s, state_.bs_opt_bytes};
  }
  const BurstPlan plan = *pending_;
  pending_.reset();
  state_.sent_bytes_total += obs.acked_bytes;
  Action act{Action::Kind::SendBurst, 0.0, std::nullopt};

  switch (plan.phase) {
    case Phase::FastStart:
      if (obs.zwa_seen) {
        const double bs = *obs.sent_bytes_at_first_zwa;
        set_steady(bs);
        state_.t_max_s = state_.t_s;
        state_.t_min_s = state_.t_s;
        propagate_bs_opt(state_.current_quality_index, bs, true);
        act = {Action::Kind::SetBsOpt, state_.t_s, bs};
      } else {
        end_fast_start(obs.acked_bytes);
        act = {state_.bs_opt_bytes ? Action::Kind::SetBsOpt : Action::Kind::SendBurst, state_.t_s,
               state_.bs_opt_bytes};
      }
      break;
    case Phase::Searching: {
      ++search_rounds_;
      if (obs.zwa_seen) {
        const double bs = *obs.sent_bytes_at_first_zwa;
        set_steady(bs);
        propagate_bs_opt(state_.current_quality_index, bs, true);
        act = {Action::Kind::SetBsOpt, state_.t_s, bs};
        break;
      }
      state_.t_min_s = std::max(state_.t_min_s, plan.interval_s);
      if (state_.t_max_s - state_.t_min_s <= config_.granularity_s) {
        // Reached T_max without flow control.
        state_.t_s = state_.t_max_s;
        const double bs = state_.t_max_s * rate_bps() / 8.0;
        set_steady(bs);
        propagate_bs_opt(state_.current_quality_index, bs, false);
        act = {Action::Kind::SetBsOpt, state_.t_s, bs};
      } else {
        state_.t_s = (state_.t_min_s + state_.t_max_s) / 2.0;
        act = {Action::Kind::SendBurst, state_.t_s, std::nullopt};
      }
      break;
    }
    case Phase::Steady:
      act = {Action::Kind::SendBurst, state_.t_s, state_.bs_opt_bytes};
      break;
    case Phase::LowBandwidth:
      state_.low_bandwidth_sent_bytes += obs.acked_bytes;
      state_.t_max_s = std::max(state_.t_max_s, state_.low_bandwidth_sent_bytes * 8.0 / rate_bps());
      act = {Action::Kind::SendBurst, config_.granularity_s, std::nullopt};
      break;
  }
  log_.push_back({plan.burst_id, plan.quality_bps, plan.interval_s, obs.acked_bytes, obs.zwa_seen,
                  state_.bs_opt_bytes, plan.phase});
  return act;
}

void Shaper::on_bandwidth_change(double est_bps) {
  if (state_.phase == Phase::FastStart || !(est_bps > 0.0)) return;
  if (config_.adaptive) {
    const auto d = policy_->select(est_bps, state_.current_quality_index, spec_.ladder());
    state_.stall_risk = d.stall_risk;
    if (d.index != state_.current_quality_index) switch_quality(d.index);
  }
  const double r = rate_bps();
  if (state_.phase != Phase::LowBandwidth && est_bps < r) {
    state_.t_old_s = state_.t_s;
    state_.low_bandwidth_sent_bytes = 0.0;
    state_.phase = Phase::LowBandwidth;
    spdlog::debug("low bandwidth ({} < {}), saving T_old = {}", est_bps, r, state_.t_s);
  } else if (state_.phase == Phase::LowBandwidth && est_bps >= config_.recovery_factor * r) {
    state_.t_s = std::min(*state_.t_old_s, state_.t_max_s);
    state_.t_old_s.reset();
    state_.t_min_s = 0.0;
    state_.bs_opt_bytes.reset();
    state_.phase = Phase::Searching;
    search_rounds_ = 0;
    probes_.clear();
    spdlog::debug("bandwidth recovered ({}), restoring T = {}", est_bps, state_.t_s);
  }
}

void Shaper::switch_quality(std::size_t to) {
  const std::size_t from = state_.current_quality_index;
  state_.current_quality_index = to;
  if (state_.phase == Phase::LowBandwidth) return;
  const double r = rate_of(to);
  if (auto it = state_.per_quality_bs_opt.find(to); it != state_.per_quality_bs_opt.end()) {
    set_steady(it->second);
  } else if (auto iv = state_.per_quality_interval.find(to); to < from && iv != state_.per_quality_interval.end()) {
    set_steady(iv->second * r / 8.0);
  } else if (auto sd = state_.per_quality_seed.find(to); to > from && sd != state_.per_quality_seed.end()) {
    // Same bytes at the higher rate: a shorter equivalent interval, then search upward.
    state_.phase = Phase::Searching;
    state_.bs_opt_bytes.reset();
    state_.t_s = std::min(sd->second * 8.0 / r, state_.t_max_s);
    state_.t_min_s = 0.0;
    search_rounds_ = 0;
    probes_.clear();
  } else {
    state_.phase = Phase::Searching;
    state_.bs_opt_bytes.reset();
    state_.t_s = std::min(std::max(state_.t_s, config_.granularity_s), state_.t_max_s);
    state_.t_min_s = 0.0;
    search_rounds_ = 0;
    probes_.clear();
  }
}

const std::map<std::size_t, double>& Shaper::propagate_bs_opt(std::size_t quality, double bs_opt_bytes,
                                                                bool byte_limited) {
  if (!(bs_opt_bytes > 0.0)) throw DomainError("BS_OPT must be > 0");
  const std::size_t n = spec_.qualities.size();
  if (byte_limited) {
    for (std::size_t i = 0; i < n; ++i) state_.per_quality_bs_opt[i] = bs_opt_bytes;
    state_.per_quality_seed.clear();
    state_.per_quality_interval.clear();
  } else {
    const double interval = bs_opt_bytes * 8.0 / rate_of(quality);
    state_.per_quality_bs_opt[quality] = bs_opt_bytes;
    for (std::size_t i = 0; i < quality; ++i) state_.per_quality_interval[i] = interval;
    for (std::size_t i = quality + 1; i < n; ++i) state_.per_quality_seed[i] = bs_opt_bytes;
  }
  return state_.per_quality_bs_opt;
}

}  // namespace estreamer::shaping
