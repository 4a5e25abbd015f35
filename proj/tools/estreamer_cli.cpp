#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "estreamer/config.hpp"
#include "estreamer/errors.hpp"
#include "estreamer/harness.hpp"
#include "estreamer/presets.hpp"

namespace fs = std::filesystem;
using namespace estreamer;

namespace {

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError(fmt::format("cannot write {}", p.string()));
  f << text;
}

std::string stalls_csv(const std::vector<client::Stall>& stalls) {
  std::string out = "start_s,end_s\n";
  for (const auto& s : stalls) out += fmt::format("{},{}\n", s.start_s, s.end_s);
  return out;
}

double default_btc(const RadioProfile& p) {
  switch (p.technology) {
    case Technology::Wifi:
      return presets::kWifiBulkRateBps;
    case Technology::Lte:
      return presets::kLteBulkRateBps;
    case Technology::Hspa:
      break;
  }
  return 4e6;
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir) {
  const auto sc = config::load_scenario(scenario_path);
  fs::path dir = out_dir.empty() ? fs::path(sc.output_dir) : fs::path(out_dir);
  if (dir.empty()) dir = fs::path("out") / sc.name;
  fs::create_directories(dir);
  const auto r = harness::run(sc);
  write_file(dir / "summary.csv", harness::summary_csv(r));
  write_file(dir / "bursts.csv", shaping::burst_log_csv(r.shaped.bursts));
  write_file(dir / "shaper_trace.csv", harness::shaper_trace_csv(r.shaped.shaper_trace));
  write_file(dir / "states.csv", r.shaped.states.to_csv());
  write_file(dir / "states_baseline.csv", r.baseline.states.to_csv());
  write_file(dir / "signaling.csv", r.shaped.signaling.to_csv());
  write_file(dir / "signaling_baseline.csv", r.baseline.signaling.to_csv());
  write_file(dir / "stalls.csv", stalls_csv(r.shaped.stalls));
  fmt::print("{}: shaped {:.1f} mJ, baseline {:.1f} mJ, savings {:.2f}%, stalls {}\n", sc.name, r.energy_mj,
             r.energy_baseline_mj, r.savings_pct, r.shaped.stalls.size());
  if (r.shaped.final_state) {
    const auto& st = *r.shaped.final_state;
    fmt::print("final phase {}, T {} s", to_string(st.phase), st.t_s);
    if (st.bs_opt_bytes) fmt::print(", BS_OPT {} bytes", *st.bs_opt_bytes);
    fmt::print("\n");
  }
  fmt::print("wrote {}\n", dir.string());
  return 0;
}

int cmd_sweep(const std::string& profile_path, std::vector<double> rs_kbps, std::vector<double> t_s,
              std::vector<double> b_mb, double btc_bps, const std::string& out) {
  const auto p = config::load_profile(profile_path);
  for (auto& r : rs_kbps) r *= 1e3;
  for (auto& b : b_mb) b *= 1e6;
  const std::string csv = harness::surface_csv(p, btc_bps > 0 ? btc_bps : default_btc(p), rs_kbps, t_s, b_mb);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_file(out, csv);
  }
  return 0;
}

int cmd_compare(const std::string& scenario_path, const std::string& a, const std::string& b,
                const std::string& expect_less, const std::string& expect_more_signaling, const std::string& out) {
  const auto sc = config::load_scenario(scenario_path);
  const auto rows = harness::compare_configs(sc, {config::load_profile(a), config::load_profile(b)});
  const std::string csv = harness::compare_csv(rows);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_file(out, csv);
  }
  int rc = 0;
  auto index_of = [&](const std::string& which) -> std::size_t {
    if (which == "a" || which == "A") return 0;
    if (which == "b" || which == "B") return 1;
    throw ConfigError(fmt::format("expected a or b, got '{}'", which));
  };
  if (!expect_less.empty()) {
    const auto i = index_of(expect_less);
    if (!(rows[i].energy_mj < rows[1 - i].energy_mj)) {
      spdlog::error("expected {} to use less energy: {} vs {} mJ", rows[i].profile, rows[i].energy_mj,
                    rows[1 - i].energy_mj);
      rc = 1;
    }
  }
  if (!expect_more_signaling.empty()) {
    const auto i = index_of(expect_more_signaling);
    if (!(rows[i].signaling_per_minute > rows[1 - i].signaling_per_minute)) {
      spdlog::error("expected {} to signal more: {} vs {} per minute", rows[i].profile, rows[i].signaling_per_minute,
                    rows[1 - i].signaling_per_minute);
      rc = 1;
    }
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Burst-shaping simulator"};
  app.require_subcommand(1);

  std::string scenario, out_dir;
  auto* run = app.add_subcommand("run", "Run a scenario shaped and baseline, write CSVs");
  run->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (default: the scenario's output_dir)");

  std::string profile, sweep_out;
  std::vector<double> rs{128, 500, 2000, 3000}, t, b;
  double btc = 0.0;
  auto* sweep = app.add_subcommand("sweep", "Average power surface as CSV");
  sweep->add_option("profile", profile, "Profile file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--rs", rs, "Encoding rates, kbit/s")->delimiter(',');
  sweep->add_option("--t", t, "Burst intervals, s")->delimiter(',')->required();
  sweep->add_option("--b", b, "Client buffer sizes, MB")->delimiter(',')->required();
  sweep->add_option("--btc", btc, "Bulk transfer capacity, bit/s");
  sweep->add_option("-o,--out", sweep_out, "Output file (default: stdout)");

  std::string cmp_scenario, prof_a, prof_b, expect_less, expect_sig, cmp_out;
  auto* compare = app.add_subcommand("compare", "Run one scenario under two profiles");
  compare->add_option("scenario", cmp_scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  compare->add_option("profile_a", prof_a, "First profile")->required()->check(CLI::ExistingFile);
  compare->add_option("profile_b", prof_b, "Second profile")->required()->check(CLI::ExistingFile);
  compare->add_option("--expect-less", expect_less, "Fail unless this profile (a|b) uses less energy");
  compare->add_option("--expect-more-signaling", expect_sig, "Fail unless this profile (a|b) signals more");
  compare->add_option("-o,--out", cmp_out, "Output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(scenario, out_dir);
    if (*sweep) return cmd_sweep(profile, rs, t, b, btc, sweep_out);
    if (*compare) return cmd_compare(cmp_scenario, prof_a, prof_b, expect_less, expect_sig, cmp_out);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
