// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures. Criterion 11 needs loopback sockets and only runs with --live.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/core.h>

#include "CLI11.hpp"
#include "estreamer/config.hpp"
#include "estreamer/energy_model.hpp"
#include "estreamer/harness.hpp"
#include "estreamer/live_proxy.hpp"
#include "estreamer/media_http.hpp"
#include "estreamer/presets.hpp"
#include "estreamer/quality.hpp"
#include "estreamer/radio_sim.hpp"
#include "loopback.hpp"

using namespace estreamer;

namespace {

const std::string kSource = ESTREAMER_SOURCE_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

struct Criterion {
  int id;
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

bool rel_le(double a, double b, double tol) { return a <= b + tol * std::max(std::abs(a), std::abs(b)); }

std::vector<radio::ActiveInterval> periodic(double period, double burst, int count) {
  std::vector<radio::ActiveInterval> v;
  for (int i = 0; i < count; ++i) v.push_back({i * period, i * period + burst, 0.0});
  return v;
}

Outcome monotonicity() {
  Outcome o;
  std::size_t points = 0;
  for (const auto& [p, btc] : {std::pair{presets::wifi_analysis(), presets::kWifiBulkRateBps},
                               std::pair{presets::lte_analysis(), presets::kLteBulkRateBps}}) {
    for (double r_s : {128e3, 500e3, 2000e3, 3000e3}) {
      for (int mb = 1; mb <= 50; ++mb) {
        const double b = mb * 1e6;
        std::vector<double> pw;
        for (int t = 1; t <= 100; ++t) pw.push_back(energy::avg_power({r_s, btc, b, double(t)}, p));
        points += pw.size();
        const double boundary = b * 8.0 / r_s;
        for (int t = 1; t < 100; ++t) {
          const bool fit_a = r_s * t <= b * 8.0, fit_b = r_s * (t + 1) <= b * 8.0;
          if (fit_a && fit_b && !rel_le(pw[t], pw[t - 1], 1e-9)) {
            o.fail(fmt::format("{} r_s={} B={}: rises in fitting regime at T={}", p.name, r_s, b, t));
          }
          if (!fit_a && !fit_b && !rel_le(pw[t - 1], pw[t], 1e-9)) {
            o.fail(fmt::format("{} r_s={} B={}: falls in overflow regime at T={}", p.name, r_s, b, t));
          }
        }
        const double global = *std::min_element(pw.begin(), pw.end());
        const int lo = std::clamp(static_cast<int>(std::floor(boundary)), 1, 100);
        const int hi = std::clamp(static_cast<int>(std::ceil(boundary)), 1, 100);
        if (!rel_le(std::min(pw[lo - 1], pw[hi - 1]), global, 1e-9)) {
          o.fail(fmt::format("{} r_s={} B={}: minimum away from T={:.2f}", p.name, r_s, b, boundary));
        }
      }
    }
  }
  if (o.pass) o.detail = fmt::format("{} grid points", points);
  return o;
}

Outcome plateau() {
  Outcome o;
  const auto p = presets::lte_analysis();
  double worst = 0.0;
  for (double r_s : {128e3, 500e3, 2000e3, 3000e3}) {
    double lo = INFINITY, hi = -INFINITY;
    for (double t = 0.05; t < 20.0; t += 0.05) {
      const energy::BurstScenario s{r_s, presets::kLteBulkRateBps, 1e12, t};
      if (energy::idle_time(s) >= p.t1_s) break;
      const double v = energy::avg_power_fitting(s, p);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double spread = (hi - lo) / lo;
    worst = std::max(worst, spread);
    if (!(spread < 1e-6)) o.fail(fmt::format("r_s={} spread {:.3g}", r_s, spread));
  }
  if (o.pass) o.detail = fmt::format("max relative spread {:.3g}", worst);
  return o;
}

Outcome closed_form() {
  Outcome o;
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto p = presets::hspa_default();
  int cases[3] = {0, 0, 0};
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    // Cycle the idle gap through the three timer regions.
    const double t_bd = 0.1 + 3.0 * u(rng);
    const int region = i % 3;
    const double idle = region == 0 ? p.t1_s * u(rng)
                        : region == 1 ? p.t1_s + p.t2_s * u(rng)
                                      : p.t1_s + p.t2_s + 30.0 * u(rng);
    const double period = t_bd + idle;
    const double bs = 1e6 + 5e6 * u(rng);
    const auto trace = radio::simulate(periodic(period, t_bd, 4), p, 4 * period + 30);
    const double sim = radio::tail_energy_of(trace, p, period + t_bd, 2 * period);
    const double closed = energy::tail_energy({bs * 8 / period, bs * 8 / t_bd, 1e12, period}, p);
    const double err = closed == 0.0 ? std::abs(sim) : std::abs(sim - closed) / closed;
    worst = std::max(worst, err);
    if (!(err <= 1e-6)) o.fail(fmt::format("idle={:.4f}: sim {} vs closed {}", idle, sim, closed));
    cases[idle < p.t1_s ? 0 : (idle < p.t1_s + p.t2_s ? 1 : 2)]++;
  }
  for (int c : cases) {
    if (c == 0) o.fail("a timer case was never exercised");
  }
  if (o.pass) o.detail = fmt::format("cases {}/{}/{}, max rel err {:.3g}", cases[0], cases[1], cases[2], worst);
  return o;
}

// Smallest grid interval whose burst overflows, swept linearly.
double sweep_oracle(double b, double r_s, double t_max, double link, double margin) {
  for (double t = 1.0; t < t_max + 1e-9; t += 1.0) {
    const auto p = harness::probe_burst(b, r_s, t, link, margin);
    if (p.zwa) return p.accepted_bytes;
  }
  return t_max * r_s / 8.0;
}

Outcome search_oracle() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int zwa = 0;
  for (int i = 0; i < 100; ++i) {
    const double r_s = 128e3 + u(rng) * 2.9e6;
    const double b = 1e6 + u(rng) * 15e6;
    const double t_max = 5.0 + std::floor(u(rng) * 95.0);
    const double link = 8e6 + u(rng) * 12e6;
    const auto s = harness::run_search(b, r_s, t_max, link, 2.0);
    const double oracle = sweep_oracle(b, r_s, t_max, link, 2.0);
    if (std::abs(s.bs_opt_bytes - oracle) > r_s / 8.0 + 1e-6) {
      o.fail(fmt::format("B={:.0f} r_s={:.0f} T_max={}: {} vs oracle {}", b, r_s, t_max, s.bs_opt_bytes, oracle));
    }
    if (s.rounds > static_cast<std::uint64_t>(std::ceil(std::log2(t_max)))) {
      o.fail(fmt::format("T_max={}: {} rounds", t_max, s.rounds));
    }
    zwa += s.zwa ? 1 : 0;
  }
  // Outcome I: no flow control all the way to T_max.
  const auto none = harness::run_search(64e6, 1e6, 40.0, 16e6, 2.0);
  if (none.zwa || none.t_opt_s != 40.0) o.fail(fmt::format("no-ZWA search ended at T={}", none.t_opt_s));
  // Outcome II: ZWA during the search.
  const auto mid = harness::run_search(3.2e6, 1e6, 60.0, 16e6, 2.0);
  if (!mid.zwa || mid.t_opt_s >= 60.0) o.fail("search without a ZWA on a 3.2 MB client");
  // Outcome III: ZWA during Fast Start.
  auto sc = config::load_scenario(kSource + "/scenarios/topt31.ini");
  const auto fs = harness::run_shaped(sc);
  const bool t31 = fs.final_state && fs.final_state->phase == shaping::Phase::Steady && !fs.bursts.empty() &&
                   fs.bursts.front().zwa && std::abs(fs.final_state->t_s - 31.0) < 1e-9;
  if (!t31) o.fail(fmt::format("Fast Start case gave T={}", fs.final_state ? fs.final_state->t_s : -1.0));
  if (o.pass) {
    o.detail = fmt::format("{}/100 overflowed; outcomes T={} / T={:.2f} / T_opt={}", zwa, none.t_opt_s, mid.t_opt_s,
                           fs.final_state->t_s);
  }
  return o;
}

harness::Scenario random_session(std::mt19937_64& rng, double floor_factor, double ceil_factor, bool dip) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  harness::Scenario sc;
  sc.name = "random";
  sc.profile = presets::lte_analysis();
  const double r_s = 128e3 + u(rng) * 2.9e6;
  sc.stream = {{{r_s, 0.0, 0, 0}}, 3600.0, 5.0 + 40.0 * u(rng)};
  sc.buffer_bytes = 2e6 + 14e6 * u(rng);
  sc.session_s = 240.0;
  std::vector<std::pair<double, double>> steps;
  for (double t = 0.0; t < 600.0; t += 10.0 + 50.0 * u(rng)) {
    steps.emplace_back(t, r_s * (floor_factor + (ceil_factor - floor_factor) * u(rng)));
  }
  if (dip) {
    const double at = 60.0 + 60.0 * u(rng);
    steps.erase(std::remove_if(steps.begin(), steps.end(), [&](auto& s) { return s.first >= at; }), steps.end());
    steps.emplace_back(at, r_s * (0.2 + 0.6 * u(rng)));
    steps.emplace_back(at + 200.0, r_s * 4.0);
  }
  sc.bandwidth = client::BandwidthTrace(steps);
  return sc;
}

Outcome stall_freedom() {
  Outcome o;
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) {
    const auto sc = random_session(rng, 2.0, 12.0, false);
    const auto s = harness::run_shaped(sc);
    for (const auto& st : s.stalls) {
      if (st.start_s >= s.fast_start_end_s) {
        o.fail(fmt::format("trace {}: stall at {:.2f} s", i, st.start_s));
      }
    }
  }
  int engaged = 0;
  for (int i = 0; i < 20; ++i) {
    const auto s = harness::run_shaped(random_session(rng, 2.0, 6.0, true));
    const bool low = std::any_of(s.shaper_trace.begin(), s.shaper_trace.end(),
                                 [](const auto& r) { return r.phase == shaping::Phase::LowBandwidth; });
    engaged += low ? 1 : 0;
  }
  if (engaged != 20) o.fail(fmt::format("fallback engaged on {}/20 dipping traces", engaged));

  // Reference trace: T_old saved at 14 s, T_max grows, T restored on recovery.
  const auto s = harness::run_shaped(config::load_scenario(kSource + "/scenarios/lowbw_hspa.ini"));
  const auto& tr = s.shaper_trace;
  auto first_low = std::find_if(tr.begin(), tr.end(), [](auto& r) { return r.phase == shaping::Phase::LowBandwidth; });
  if (first_low == tr.end()) {
    o.fail("lowbw_hspa never entered LOW_BANDWIDTH");
    return o;
  }
  auto after = std::find_if(first_low, tr.end(), [](auto& r) { return r.phase != shaping::Phase::LowBandwidth; });
  if (first_low->t_old_s != 14.0) o.fail(fmt::format("T_old {}", first_low->t_old_s.value_or(-1)));
  for (auto it = first_low + 1; it != after; ++it) {
    if (it->t_max_s < (it - 1)->t_max_s) o.fail("T_max shrank during LOW_BANDWIDTH");
  }
  if (after == tr.end()) {
    o.fail("no recovery");
    return o;
  }
  if (after->phase != shaping::Phase::Searching || after->t_s != 14.0 || after->t_max_s != 43.0) {
    o.fail(fmt::format("after recovery: {} T={} T_max={}", to_string(after->phase), after->t_s, after->t_max_s));
  }
  if (o.pass) {
    o.detail = fmt::format("100 traces stall-free; fallback 20/20; T_old={} T_max {}->{} restored T={}",
                           *first_low->t_old_s, first_low->t_max_s, after->t_max_s, after->t_s);
  }
  return o;
}

Outcome quality_rule() {
  Outcome o;
  const std::vector<double> ladder{700e3, 1200e3, 1500e3, 2000e3, 2500e3, 3000e3};
  shaping::TwiceRatePolicy policy;
  if (ladder[policy.initial(ladder)] != 700e3) o.fail("initial quality is not 700 kbit/s");
  int checked = 0;
  for (std::size_t cur = 0; cur < ladder.size(); ++cur) {
    for (int k = 1; k <= 80; ++k) {
      const double est = k * 1e5;
      const auto d = policy.select(est, cur, ladder);
      const bool upgraded = d.index > cur;
      const bool should = cur + 1 < ladder.size() && est >= 2.0 * ladder[cur + 1];
      if (upgraded != should) o.fail(fmt::format("est={} at {}: picked {}", est, ladder[cur], ladder[d.index]));
      if (upgraded) {
        // The highest quality the estimate supports at twice its rate.
        std::size_t best = cur;
        while (best + 1 < ladder.size() && est >= 2.0 * ladder[best + 1]) ++best;
        if (d.index != best) o.fail(fmt::format("est={} at {}: upgraded to {}", est, ladder[cur], ladder[d.index]));
      }
      ++checked;
    }
  }
  if (o.pass) o.detail = fmt::format("{} decisions", checked);
  return o;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome protocol() {
  using namespace http;
  Outcome o;
  const auto dir = std::filesystem::path(kSource) / "tests/data/wire";
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string raw = read_file(e.path());
    const std::string want = normalize_crlf(raw) + "\r\n";
    const bool req = e.path().stem().string().find("request") != std::string::npos;
    const std::string got = req ? render_request(parse_request(raw)) : render_response(parse_response(raw));
    if (got != want) o.fail(fmt::format("{} does not round trip", e.path().filename().string()));
    ++n;
  }
  if (n != 12) o.fail(fmt::format("expected 12 wire messages, found {}", n));

  const std::vector<QualityInfo> ladder{{700e3, 2604, 320, 480}, {2000e3, 2604, 720, 1280}};
  StreamResponder server(ladder, 597);
  ReferenceClient client("/BigBuckBunny", "www.service-x.com", "ANDROID");
  auto resp = server.respond(client.next_request(), 0, 60);
  client.on_response(resp);
  resp = server.respond(client.next_request(), 0, 60);
  client.on_response(resp, resp.content_length_bytes);
  resp = server.respond(client.next_request(), 0, 40);
  client.on_response(resp, resp.content_length_bytes);
  resp = server.respond(client.next_request(), 1, 40);
  client.on_response(resp);
  resp = server.respond(client.next_request(), 1, 40);
  server.truncate_last(35);
  client.on_response(resp, 35 * 2000000 / 8);
  resp = server.respond(client.next_request(), 1, 40);
  const auto parsed = parse_response(render_response(resp));
  if (parsed.status != 204 || parsed.stream_info->get("seconds") != "100-134") o.fail("no 204 for seconds 100-134");
  client.on_response(parsed);
  const auto again = client.next_request();
  if (again.range_start_s != 135) o.fail(fmt::format("re-request at {}", again.range_start_s));
  if (render_request(parse_request(render_request(again))) != render_request(again)) o.fail("re-request round trip");
  if (o.pass) o.detail = fmt::format("{} messages; correction re-request at seconds={}-", n, again.range_start_s);
  return o;
}

Outcome signaling() {
  using radio::RrcState;
  Outcome o;
  const int n = 16;
  const double period = 39.0;
  const double horizon = n * period;
  const auto spans = periodic(period, 2.0, n);
  struct Expect {
    RadioProfile profile;
    std::int64_t transitions;
  };
  // Per burst: HSPA with PCH wakes from PCH and steps down twice; without PCH
  // the gap ends in IDLE; legacy fast dormancy drops straight to IDLE; LTE
  // connects and releases once.
  const std::vector<Expect> table{
      {presets::hspa_default(), 1 + (n - 1) + 2 * n},
      {presets::hspa_aggressive(), 1 + (n - 1) + 2 * n},
      {presets::hspa_no_pch(), 3 * n},
      {presets::with_legacy_fd(presets::hspa_default(), 6.5), 2 * n},
      {presets::lte_no_drx(), 2 * n},
      {presets::lte_drx(), 2 * n},
      {presets::lte_drx_long_idle(), 2 * n},
  };
  std::vector<std::string> rates;
  for (const auto& e : table) {
    const auto trace = radio::simulate(spans, e.profile, horizon);
    std::int64_t count = 0;
    for (const auto& [k, v] : radio::transition_counts(trace)) count += v;
    const double per_min = count * 60.0 / horizon, hand = e.transitions * 60.0 / horizon;
    if (per_min != hand) o.fail(fmt::format("{}: {} transitions/min, hand count {}", e.profile.name, per_min, hand));
    rates.push_back(fmt::format("{:.2f}", per_min));
  }
  auto weighted = [&](const RadioProfile& p) {
    return radio::signaling_of(radio::simulate(spans, p, horizon), radio::SignalingCostTable::defaults(p.technology))
        .per_minute;
  };
  const double def = weighted(presets::hspa_default());
  const double fd = weighted(presets::with_legacy_fd(presets::hspa_default(), 6.5));
  const double nopch = weighted(presets::hspa_no_pch());
  if (!(fd > def)) o.fail(fmt::format("legacy FD {} not above PCH {}", fd, def));
  if (!(nopch > def)) o.fail(fmt::format("noPCH {} not above default {}", nopch, def));
  auto count = [&](const RadioProfile& p) {
    std::int64_t c = 0;
    for (const auto& [k, v] : radio::transition_counts(radio::simulate(spans, p, horizon))) c += v;
    return c;
  };
  const auto delta = count(presets::lte_drx()) - count(presets::lte_no_drx());
  if (delta != 0) o.fail(fmt::format("cDRX changes transitions by {}", delta));
  if (o.pass) {
    std::string joined;
    for (const auto& r : rates) joined += (joined.empty() ? "" : " ") + r;
    o.detail = fmt::format("per-minute {}; weighted FD {:.1f} > PCH {:.1f} < noPCH {:.1f}; cDRX delta 0", joined, fd,
                           def, nopch);
  }
  return o;
}

Outcome timer_paradox() {
  Outcome o;
  const auto sc = config::load_scenario(kSource + "/scenarios/audio_lte_drx.ini");
  const auto rows = harness::compare_configs(sc, {presets::lte_drx(), presets::lte_drx_long_idle()});
  const auto s = harness::run_shaped(sc);
  if (!s.final_state || s.final_state->t_s != 18.0) o.fail("scenario does not settle at 18 s bursts");
  if (!(rows[1].energy_mj < rows[0].energy_mj)) {
    o.fail(fmt::format("RRC_idle 20 s {:.1f} mJ vs 10 s {:.1f} mJ", rows[1].energy_mj, rows[0].energy_mj));
  }
  if (o.pass) o.detail = fmt::format("20 s {:.1f} mJ < 10 s {:.1f} mJ", rows[1].energy_mj, rows[0].energy_mj);
  return o;
}

Outcome background() {
  Outcome o;
  const auto quiet = harness::run(config::load_scenario(kSource + "/scenarios/audio_lte_drx.ini"));
  const auto busy = harness::run(config::load_scenario(kSource + "/scenarios/audio_lte_drx_background.ini"));
  if (!(busy.energy_mj > quiet.energy_mj)) {
    o.fail(fmt::format("with background {:.1f} mJ, without {:.1f} mJ", busy.energy_mj, quiet.energy_mj));
  }
  if (o.pass) {
    o.detail = fmt::format("{:.1f} -> {:.1f} mJ (+{:.1f}%)", quiet.energy_mj, busy.energy_mj,
                           100.0 * (busy.energy_mj / quiet.energy_mj - 1.0));
  }
  return o;
}

Outcome live_convergence() {
  using namespace std::chrono_literals;
  Outcome o;
  testing::Origin origin({1e6, 16e6, 0.0, true});
  proxy::ProxyConfig cfg;
  cfg.fast_start_seconds = 60.0;
  proxy::LiveProxy p(cfg);
  const int port = p.start();
  testing::ConstrainedClient client(port, origin.port(), {4e6, 1e6});
  std::optional<double> bs_opt;
  const auto end = std::chrono::steady_clock::now() + 90s;
  while (!bs_opt && std::chrono::steady_clock::now() < end) {
    std::this_thread::sleep_for(100ms);
    for (const auto& s : p.sessions()) bs_opt = s.state.bs_opt_bytes;
  }
  client.stop();
  p.stop();
  if (!bs_opt) {
    o.fail("no BS_OPT within 90 s");
  } else if (std::abs(*bs_opt - 4e6) > 0.25 * 4e6) {
    o.fail(fmt::format("BS_OPT {:.0f} bytes", *bs_opt));
  } else {
    o.detail = fmt::format("BS_OPT {:.0f} bytes ({:+.1f}% of 4 MB)", *bs_opt, 100.0 * (*bs_opt / 4e6 - 1.0));
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  bool live = false;
  std::vector<int> only;
  app.add_flag("--live", live, "Also run the loopback proxy criterion");
  app.add_option("--only", only, "Run just these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "model monotonicity", 10.0, monotonicity},
      {2, "LTE plateau", 1.0, plateau},
      {3, "closed form vs simulation", 30.0, closed_form},
      {4, "interval search vs sweep oracle", 60.0, search_oracle},
      {5, "stall freedom and low-bandwidth bookkeeping", 60.0, stall_freedom},
      {6, "quality switch rule", 1.0, quality_rule},
      {7, "protocol bit-exactness", 1.0, protocol},
      {8, "signaling directionality", 10.0, signaling},
      {9, "LTE timer paradox", 5.0, timer_paradox},
      {10, "background traffic degradation", 10.0, background},
      {11, "live proxy convergence", 120.0, live_convergence},
  };

  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    if (c.id == 11 && !live) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.fail(fmt::format("exception: {}", e.what()));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit_s) o.fail(fmt::format("took {:.2f} s, limit {} s", secs, c.limit_s));
    fmt::print("{} [{:>2}] {} ({:.2f} s / {} s): {}\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, c.limit_s,
               o.detail);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures;
}
