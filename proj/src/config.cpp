#include "estreamer/config.hpp"

#include <fmt/format.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "estreamer/errors.hpp"

namespace estreamer::config {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

namespace {

pt::ptree read_ini(const std::string& text, const std::string& origin) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("{}: {}", origin, e.message()));
  }
  return tree;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class Section {
 public:
  Section(const pt::ptree* node, std::string name, std::string origin)
      : node_(node), name_(std::move(name)), origin_(std::move(origin)) {}

  bool present() const { return node_ != nullptr; }

  std::optional<std::string> str(const std::string& key) {
    used_.insert(key);
    if (!node_) return std::nullopt;
    auto it = node_->find(key);
    if (it == node_->not_found()) return std::nullopt;
    return it->second.data();
  }

  std::string req_str(const std::string& key) {
    auto v = str(key);
    if (!v) throw ConfigError(fmt::format("{}: [{}] is missing '{}'", origin_, name_, key));
    return *v;
  }

  std::optional<double> num(const std::string& key) {
    auto v = str(key);
    if (!v) return std::nullopt;
    return to_double(*v, key);
  }

  double num_or(const std::string& key, double dflt) { return num(key).value_or(dflt); }
  double req_num(const std::string& key) { return to_double(req_str(key), key); }

  bool flag_or(const std::string& key, bool dflt) {
    auto v = str(key);
    if (!v) return dflt;
    if (*v == "true" || *v == "on" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "off" || *v == "0" || *v == "no") return false;
    throw ConfigError(fmt::format("{}: [{}] {} is not a boolean ('{}')", origin_, name_, key, *v));
  }

  double to_double(const std::string& s, const std::string& key) const {
    try {
      std::size_t pos = 0;
      const double d = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return d;
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{}: [{}] {} is not a number ('{}')", origin_, name_, key, s));
    }
  }

  /// Unknown keys are almost always typos.
  void reject_unknown() const {
    if (!node_) return;
    for (const auto& [k, v] : *node_) {
      if (!used_.count(k)) throw ConfigError(fmt::format("{}: [{}] has unknown key '{}'", origin_, name_, k));
    }
  }

 private:
  const pt::ptree* node_;
  std::string name_;
  std::string origin_;
  std::set<std::string> used_;
};

Section section(const pt::ptree& tree, const std::string& name, const std::string& origin) {
  auto it = tree.find(name);
  return {it == tree.not_found() ? nullptr : &it->second, name, origin};
}

void reject_unknown_sections(const pt::ptree& tree, std::initializer_list<const char*> known, const std::string& origin) {
  for (const auto& [k, v] : tree) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigError(fmt::format("{}: unknown section [{}]", origin, k));
  }
}

std::vector<std::string> split_ws(const std::string& s, char extra = ' ') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == extra) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

RadioProfile parse_profile(const std::string& ini_text, const std::string& origin) {
  const auto tree = read_ini(ini_text, origin);
  reject_unknown_sections(tree, {"profile", "drx"}, origin);
  auto s = section(tree, "profile", origin);
  if (!s.present()) throw ConfigError(fmt::format("{}: missing [profile] section", origin));
  RadioProfile p;
  p.name = s.req_str("name");
  p.technology = parse_technology(s.req_str("technology"));
  p.t1_s = s.req_num("t1_s");
  p.t2_s = s.num_or("t2_s", 0.0);
  p.t3_s = s.num_or("t3_s", 0.0);
  p.p1_mw = s.num("p1_mw");
  p.p2_mw = s.num("p2_mw");
  p.p_tail_mw = s.req_num("p_tail_mw");
  p.a_coeff = s.num_or("a_coeff", 1.0);
  p.k_coeff = s.num_or("k_coeff", 0.0);
  p.pch_enabled = s.flag_or("pch_enabled", p.technology == Technology::Hspa);
  if (auto fd = s.str("fast_dormancy")) p.fast_dormancy = parse_fast_dormancy(*fd);
  p.legacy_fd_timeout_s = s.num_or("fd_timeout_s", 0.0);
  p.pch_mw = s.num_or("pch_mw", 0.0);
  p.idle_mw = s.num_or("idle_mw", 0.0);
  p.drx_off_mw = s.num_or("drx_off_mw", 0.0);
  p.promotion_energy_mj = s.num_or("promotion_energy_mj", 0.0);
  s.reject_unknown();

  auto d = section(tree, "drx", origin);
  if (d.present()) {
    p.drx = DrxConfig{d.req_num("idle_ms"), d.req_num("cycle_ms"), d.req_num("on_ms")};
    d.reject_unknown();
  }
  p.validate();
  return p;
}

RadioProfile load_profile(const std::string& path) { return parse_profile(slurp(path), path); }

std::string render_profile(const RadioProfile& p) {
  std::string out = "[profile]\n";
  out += fmt::format("name = {}\n", p.name);
  out += fmt::format("technology = {}\n", to_string(p.technology));
  out += fmt::format("t1_s = {}\n", p.t1_s);
  if (p.t2_s != 0.0) out += fmt::format("t2_s = {}\n", p.t2_s);
  if (p.t3_s != 0.0) out += fmt::format("t3_s = {}\n", p.t3_s);
  if (p.p1_mw) out += fmt::format("p1_mw = {}\n", *p.p1_mw);
  if (p.p2_mw) out += fmt::format("p2_mw = {}\n", *p.p2_mw);
  out += fmt::format("p_tail_mw = {}\n", p.p_tail_mw);
  out += fmt::format("a_coeff = {}\n", p.a_coeff);
  out += fmt::format("k_coeff = {}\n", p.k_coeff);
  out += fmt::format("pch_enabled = {}\n", p.pch_enabled);
  if (p.fast_dormancy != FastDormancy::None) {
    out += fmt::format("fast_dormancy = {}\n", to_string(p.fast_dormancy));
    out += fmt::format("fd_timeout_s = {}\n", p.legacy_fd_timeout_s);
  }
  if (p.pch_mw != 0.0) out += fmt::format("pch_mw = {}\n", p.pch_mw);
  if (p.idle_mw != 0.0) out += fmt::format("idle_mw = {}\n", p.idle_mw);
  if (p.drx_off_mw != 0.0) out += fmt::format("drx_off_mw = {}\n", p.drx_off_mw);
  if (p.promotion_energy_mj != 0.0) out += fmt::format("promotion_energy_mj = {}\n", p.promotion_energy_mj);
  if (p.drx) {
    out += fmt::format("\n[drx]\nidle_ms = {}\ncycle_ms = {}\non_ms = {}\n", p.drx->idle_ms, p.drx->cycle_ms,
                       p.drx->on_ms);
  }
  return out;
}

harness::Scenario parse_scenario(const std::string& ini_text, const std::string& base_dir, const std::string& origin) {
  const auto tree = read_ini(ini_text, origin);
  reject_unknown_sections(tree, {"scenario", "stream", "bandwidth", "background", "signaling"}, origin);
  harness::Scenario sc;

  auto s = section(tree, "scenario", origin);
  if (!s.present()) throw ConfigError(fmt::format("{}: missing [scenario] section", origin));
  sc.name = s.req_str("name");
  fs::path prof = s.req_str("profile");
  if (prof.is_relative()) prof = fs::path(base_dir) / prof;
  if (!fs::exists(prof)) {
    throw ConfigError(fmt::format("{}: scenario '{}' references missing profile '{}'", origin, sc.name, prof.string()));
  }
  sc.profile = load_profile(prof.string());
  sc.buffer_bytes = s.req_num("buffer_bytes");
  sc.session_s = s.req_num("session_s");
  sc.startup_threshold_s = s.num_or("startup_threshold_s", sc.startup_threshold_s);
  sc.margin_s = s.num_or("margin_s", sc.margin_s);
  sc.granularity_s = s.num_or("granularity_s", sc.granularity_s);
  sc.adaptive = s.flag_or("adaptive", false);
  sc.segment_bytes = s.num_or("segment_bytes", sc.segment_bytes);
  sc.output_dir = s.str("output_dir").value_or("");
  s.reject_unknown();

  auto st = section(tree, "stream", origin);
  if (!st.present()) throw ConfigError(fmt::format("{}: missing [stream] section", origin));
  for (const auto& tok : split_ws(st.req_str("bitrates_bps"), ',')) {
    sc.stream.qualities.push_back({st.to_double(tok, "bitrates_bps"), 0.0, 0, 0});
  }
  sc.stream.duration_s = st.req_num("duration_s");
  sc.stream.fast_start_seconds = st.num_or("fast_start_seconds", sc.stream.fast_start_seconds);
  st.reject_unknown();

  auto bw = section(tree, "bandwidth", origin);
  if (!bw.present()) throw ConfigError(fmt::format("{}: missing [bandwidth] section", origin));
  std::vector<std::pair<double, double>> steps;
  for (const auto& tok : split_ws(bw.req_str("steps"), ',')) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos) throw ConfigError(fmt::format("{}: bandwidth step '{}' is not t:bps", origin, tok));
    steps.emplace_back(bw.to_double(tok.substr(0, colon), "steps"), bw.to_double(tok.substr(colon + 1), "steps"));
  }
  bw.reject_unknown();
  sc.bandwidth = client::BandwidthTrace(std::move(steps));

  auto bg = section(tree, "background", origin);
  if (bg.present()) {
    harness::BackgroundTraffic b;
    b.period_s = bg.req_num("period_s");
    b.bytes = bg.req_num("bytes");
    b.phase_s = bg.num_or("phase_s", 0.0);
    b.rate_bps = bg.num_or("rate_bps", b.rate_bps);
    bg.reject_unknown();
    sc.background = b;
  }

  if (auto it = tree.find("signaling"); it != tree.not_found()) {
    sc.costs = radio::SignalingCostTable::defaults(sc.profile.technology);
    for (const auto& [key, val] : it->second) {
      const auto arrow = key.find("->");
      if (arrow == std::string::npos) throw ConfigError(fmt::format("{}: signaling key '{}' is not FROM->TO", origin, key));
      Section tmp(&it->second, "signaling", origin);
      sc.costs.set(radio::parse_rrc_state(key.substr(0, arrow)), radio::parse_rrc_state(key.substr(arrow + 2)),
                   tmp.to_double(val.data(), key));
    }
    sc.costs.validate();
  }
  sc.validate();
  return sc;
}

harness::Scenario load_scenario(const std::string& path) {
  return parse_scenario(slurp(path), fs::path(path).parent_path().string(), path);
}

}  // namespace estreamer::config
