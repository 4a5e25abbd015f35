#include <gtest/gtest.h>

#include "estreamer/errors.hpp"
#include "estreamer/shaper.hpp"

namespace estreamer::shaping {
namespace {

StreamSpec single(double bps, double fast_start_s = 30.0) { return {{{bps, 0.0, 0, 0}}, 3600.0, fast_start_s}; }

StreamSpec ladder_spec() {
  StreamSpec s;
  for (double r : {700e3, 1200e3, 1500e3, 2000e3, 2500e3, 3000e3}) s.qualities.push_back({r, 0.0, 0, 0});
  s.duration_s = 3600.0;
  return s;
}

profiling::BurstObservation fit(const BurstPlan& p, double bw = 8e6) {
  profiling::BurstObservation o;
  o.burst_id = p.burst_id;
  o.acked_bytes = p.bytes;
  o.complete = true;
  o.t_bd_s = p.bytes * 8.0 / bw;
  o.est_bandwidth_bps = bw;
  return o;
}

profiling::BurstObservation zwa(const BurstPlan& p, double at_bytes, double bw = 8e6) {
  auto o = fit(p, bw);
  o.zwa_seen = true;
  o.acked_bytes = at_bytes;
  o.complete = false;
  o.sent_bytes_at_first_zwa = at_bytes;
  return o;
}

TEST(Shaper, SearchWithoutZwaReachesTmax) {
  Shaper sh(single(1e6));
  sh.begin_search(40.0);
  std::vector<double> seen;
  while (sh.state().phase == Phase::Searching) {
    const auto p = sh.next_burst();
    EXPECT_TRUE(p.stop_on_zwa);
    EXPECT_DOUBLE_EQ(p.bytes, p.interval_s * 1e6 / 8.0);
    seen.push_back(p.interval_s);
    sh.on_burst_feedback(fit(p));
  }
  EXPECT_EQ(seen, (std::vector<double>{20, 30, 35, 37.5, 38.75, 39.375}));
  EXPECT_EQ(sh.state().phase, Phase::Steady);
  EXPECT_DOUBLE_EQ(sh.state().t_s, 40.0);
  EXPECT_DOUBLE_EQ(*sh.state().bs_opt_bytes, 5e6);
  EXPECT_EQ(sh.search_rounds(), 6u);
}

TEST(Shaper, FastStartEndsIntoSearch) {
  Shaper sh(single(500e3, 20.0));
  const auto fs = sh.next_burst();
  EXPECT_EQ(fs.phase, Phase::FastStart);
  EXPECT_DOUBLE_EQ(fs.bytes, 1.25e6);
  sh.on_burst_feedback(fit(fs));
  EXPECT_EQ(sh.state().phase, Phase::Searching);
  EXPECT_DOUBLE_EQ(sh.state().t_max_s, 20.0);
  EXPECT_DOUBLE_EQ(sh.state().t_s, 10.0);
  EXPECT_DOUBLE_EQ(sh.next_burst().bytes, 10.0 * 500e3 / 8.0);
}

TEST(Shaper, ZwaDuringSearchSetsBsOpt) {
  Shaper sh(single(1e6));
  sh.begin_search(40.0);
  auto p = sh.next_burst();
  sh.on_burst_feedback(fit(p));
  p = sh.next_burst();
  EXPECT_DOUBLE_EQ(p.interval_s, 30.0);
  const auto act = sh.on_burst_feedback(zwa(p, 3.2e6));
  EXPECT_EQ(act.kind, Action::Kind::SetBsOpt);
  EXPECT_DOUBLE_EQ(*act.bs_opt_bytes, 3.2e6);
  EXPECT_EQ(sh.state().phase, Phase::Steady);
  EXPECT_DOUBLE_EQ(sh.state().t_s, 25.6);
  const auto steady = sh.next_burst();
  EXPECT_DOUBLE_EQ(steady.bytes, 3.2e6);
  EXPECT_FALSE(steady.stop_on_zwa);
}

TEST(Shaper, ZwaDuringFastStart) {
  Shaper sh(single(2e6, 45.0));
  const auto fs = sh.next_burst();
  const auto act = sh.on_burst_feedback(zwa(fs, 7.75e6, 16e6));
  EXPECT_EQ(act.kind, Action::Kind::SetBsOpt);
  EXPECT_EQ(sh.state().phase, Phase::Steady);
  EXPECT_DOUBLE_EQ(sh.state().t_s, 31.0);
  EXPECT_DOUBLE_EQ(*sh.state().bs_opt_bytes, 7.75e6);
}

TEST(Shaper, SteadyZwaKeepsBsOpt) {
  Shaper sh(single(1e6));
  sh.begin_search(2.0);
  auto p = sh.next_burst();
  sh.on_burst_feedback(fit(p));
  ASSERT_EQ(sh.state().phase, Phase::Steady);
  const double bs = *sh.state().bs_opt_bytes;
  p = sh.next_burst();
  sh.on_burst_feedback(zwa(p, bs / 2));
  EXPECT_DOUBLE_EQ(*sh.state().bs_opt_bytes, bs);
}

TEST(Shaper, StaleFeedbackIgnored) {
  Shaper sh(single(1e6));
  sh.begin_search(40.0);
  const auto p = sh.next_burst();
  auto o = fit(p);
  o.burst_id = p.burst_id + 5;
  EXPECT_EQ(sh.on_burst_feedback(o).kind, Action::Kind::Ignored);
  EXPECT_EQ(sh.warnings(), 1u);
  EXPECT_DOUBLE_EQ(sh.state().t_s, 20.0);
  EXPECT_EQ(sh.on_burst_feedback(fit(p)).kind, Action::Kind::SendBurst);
  EXPECT_EQ(sh.on_burst_feedback(fit(p)).kind, Action::Kind::Ignored);
  EXPECT_EQ(sh.warnings(), 2u);
}

TEST(Shaper, LowBandwidthBookkeeping) {
  const double r = 128e3;
  Shaper sh(single(r, 14.0));
  auto p = sh.next_burst();
  sh.on_burst_feedback(fit(p, 1e6));
  EXPECT_DOUBLE_EQ(sh.state().t_max_s, 14.0);
  EXPECT_DOUBLE_EQ(sh.state().t_s, 7.0);
  p = sh.next_burst();
  sh.on_burst_feedback(fit(p, 1e6));
  sh.on_bandwidth_change(1e6);
  EXPECT_DOUBLE_EQ(sh.state().t_s, 10.5);
  sh.on_bandwidth_change(64e3);
  EXPECT_EQ(sh.state().phase, Phase::LowBandwidth);
  EXPECT_DOUBLE_EQ(*sh.state().t_old_s, 10.5);

  for (int i = 0; i < 20; ++i) {
    p = sh.next_burst();
    EXPECT_TRUE(p.continuous);
    EXPECT_DOUBLE_EQ(p.bytes, r / 8.0);
    sh.on_burst_feedback(fit(p, 64e3));
    sh.on_bandwidth_change(64e3);
    EXPECT_EQ(sh.state().phase, Phase::LowBandwidth);
  }
  EXPECT_DOUBLE_EQ(sh.state().t_max_s, 20.0);
  // Still below 2 r_s: no recovery.
  sh.on_bandwidth_change(200e3);
  EXPECT_EQ(sh.state().phase, Phase::LowBandwidth);
  p = sh.next_burst();
  sh.on_burst_feedback(fit(p, 300e3));
  sh.on_bandwidth_change(300e3);
  EXPECT_EQ(sh.state().phase, Phase::Searching);
  EXPECT_DOUBLE_EQ(sh.state().t_max_s, 21.0);
  EXPECT_DOUBLE_EQ(sh.state().t_s, 10.5);
  EXPECT_FALSE(sh.state().t_old_s);
}

TEST(Shaper, AdaptiveStartsAt700k) {
  Shaper sh(ladder_spec(), {1.0, 2.0, true});
  EXPECT_DOUBLE_EQ(sh.rate_bps(), 700e3);
  EXPECT_DOUBLE_EQ(sh.fast_start_bytes(), 30 * 700e3 / 8);
}

TEST(Shaper, AdaptiveFastStartFitSetsBsOpt) {
  Shaper sh(ladder_spec(), {1.0, 2.0, true});
  const auto fs = sh.next_burst();
  sh.on_burst_feedback(fit(fs));
  EXPECT_EQ(sh.state().phase, Phase::Steady);
  EXPECT_DOUBLE_EQ(*sh.state().bs_opt_bytes, fs.bytes);
  EXPECT_DOUBLE_EQ(sh.state().t_max_s, 30.0);
  // 8 Mbit/s supports 3 Mbit/s: the seed turns into a shorter search interval.
  sh.on_bandwidth_change(8e6);
  EXPECT_EQ(sh.state().current_quality_index, 5u);
  EXPECT_EQ(sh.state().phase, Phase::Searching);
  EXPECT_DOUBLE_EQ(sh.state().t_s, fs.bytes * 8 / 3000e3);
}

TEST(Shaper, PropagateByteLimited) {
  Shaper sh(ladder_spec(), {1.0, 2.0, true});
  const auto& m = sh.propagate_bs_opt(2, 4e6, true);
  ASSERT_EQ(m.size(), 6u);
  for (const auto& [q, bs] : m) EXPECT_DOUBLE_EQ(bs, 4e6);
  EXPECT_THROW(sh.propagate_bs_opt(2, 0.0, true), DomainError);
}

TEST(Shaper, PropagateIntervalLimited) {
  Shaper sh(ladder_spec(), {1.0, 2.0, true});
  sh.propagate_bs_opt(3, 5e6, false);  // 20 s at 2 Mbit/s
  const auto& st = sh.state();
  EXPECT_EQ(st.per_quality_bs_opt.size(), 1u);
  EXPECT_DOUBLE_EQ(st.per_quality_interval.at(0), 20.0);
  EXPECT_DOUBLE_EQ(st.per_quality_interval.at(2), 20.0);
  EXPECT_DOUBLE_EQ(st.per_quality_seed.at(4), 5e6);
  EXPECT_FALSE(st.per_quality_interval.count(4));
}

TEST(Shaper, DowngradeUsesInheritedInterval) {
  Shaper sh(ladder_spec(), {1.0, 2.0, true});
  const auto fs = sh.next_burst();
  sh.on_burst_feedback(fit(fs, 16e6));
  sh.on_bandwidth_change(4.5e6);  // up to 2 Mbit/s
  ASSERT_EQ(sh.state().current_quality_index, 3u);
  while (sh.state().phase == Phase::Searching) {
    const auto p = sh.next_burst();
    sh.on_burst_feedback(fit(p, 4.5e6));
  }
  const double t_hi = sh.state().t_s;
  sh.on_bandwidth_change(1.3e6);
  EXPECT_EQ(sh.state().current_quality_index, 1u);
  EXPECT_EQ(sh.state().phase, Phase::Steady);
  EXPECT_DOUBLE_EQ(sh.state().t_s, t_hi);
}

TEST(Shaper, StallRiskBelowLadder) {
  Shaper sh(ladder_spec(), {1.0, 2.0, true});
  sh.on_burst_feedback(fit(sh.next_burst()));
  sh.on_bandwidth_change(400e3);
  EXPECT_TRUE(sh.state().stall_risk);
  EXPECT_EQ(sh.state().phase, Phase::LowBandwidth);
}

TEST(Shaper, ValidationAndCsv) {
  EXPECT_THROW(Shaper(StreamSpec{}), ConfigError);
  EXPECT_THROW(Shaper(StreamSpec{{{2e6, 0, 0, 0}, {1e6, 0, 0, 0}}, 10, 5}), ConfigError);
  EXPECT_THROW(Shaper(single(1e6), {0.0}), ConfigError);
  Shaper sh(single(1e6));
  sh.on_burst_feedback(fit(sh.next_burst()));
  const auto csv = burst_log_csv(sh.log());
  EXPECT_EQ(csv.rfind("burst_id,quality_bps,T_s,bytes,zwa,bs_opt_bytes,phase\n", 0), 0u);
  EXPECT_NE(csv.find("FAST_START"), std::string::npos);
}

}  // namespace
}  // namespace estreamer::shaping
