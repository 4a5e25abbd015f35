#include "estreamer/radio_profile.hpp"

#include <fmt/format.h>

#include <cmath>

#include "estreamer/errors.hpp"

namespace estreamer {

std::string_view to_string(Technology t) {
  switch (t) {
    case Technology::Wifi:
      return "WIFI";
    case Technology::Hspa:
      return "HSPA";
    case Technology::Lte:
      return "LTE";
  }
  return "?";
}

std::string_view to_string(FastDormancy fd) {
  switch (fd) {
    case FastDormancy::None:
      return "NONE";
    case FastDormancy::Legacy:
      return "LEGACY";
    case FastDormancy::Rel8:
      return "REL8";
  }
  return "?";
}

Technology parse_technology(std::string_view s) {
  if (s == "WIFI" || s == "wifi" || s == "Wi-Fi") return Technology::Wifi;
  if (s == "HSPA" || s == "hspa") return Technology::Hspa;
  if (s == "LTE" || s == "lte") return Technology::Lte;
  throw ConfigError(fmt::format("unknown technology '{}'", s));
}

FastDormancy parse_fast_dormancy(std::string_view s) {
  if (s == "NONE" || s == "none") return FastDormancy::None;
  if (s == "LEGACY" || s == "legacy") return FastDormancy::Legacy;
  if (s == "REL8" || s == "rel8") return FastDormancy::Rel8;
  throw ConfigError(fmt::format("unknown fast dormancy mode '{}'", s));
}

namespace {

void require_non_negative(double v, std::string_view what, std::string_view profile) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError(fmt::format("profile '{}': {} must be a finite value >= 0 (got {})", profile, what, v));
  }
}

}  // namespace

void RadioProfile::validate() const {
  require_non_negative(t1_s, "t1_s", name);
  require_non_negative(t2_s, "t2_s", name);
  require_non_negative(t3_s, "t3_s", name);
  require_non_negative(p_tail_mw, "p_tail_mw", name);
  require_non_negative(k_coeff, "k_coeff", name);
  require_non_negative(pch_mw, "pch_mw", name);
  require_non_negative(idle_mw, "idle_mw", name);
  require_non_negative(drx_off_mw, "drx_off_mw", name);
  require_non_negative(legacy_fd_timeout_s, "legacy_fd_timeout_s", name);
  require_non_negative(promotion_energy_mj, "promotion_energy_mj", name);
  if (p1_mw) require_non_negative(*p1_mw, "p1_mw", name);
  if (p2_mw) require_non_negative(*p2_mw, "p2_mw", name);
  if (!(a_coeff >= 1.0)) {
    throw ConfigError(fmt::format("profile '{}': a_coeff must be >= 1 (got {})", name, a_coeff));
  }
  if (p1_mw && p2_mw && *p2_mw > *p1_mw) {
    throw ConfigError(fmt::format("profile '{}': p2_mw ({}) must not exceed p1_mw ({})", name, *p2_mw, *p1_mw));
  }
  if (drx) {
    if (technology != Technology::Lte) {
      throw ConfigError(fmt::format("profile '{}': DRX is only valid for LTE", name));
    }
    if (!(drx->cycle_ms > 0.0) || !(drx->on_ms > 0.0) || drx->on_ms > drx->cycle_ms || drx->idle_ms < 0.0) {
      throw ConfigError(fmt::format("profile '{}': DRX needs 0 < on_ms <= cycle_ms and idle_ms >= 0", name));
    }
  }
  if (technology != Technology::Hspa && t2_s != 0.0) {
    throw ConfigError(fmt::format("profile '{}': t2_s must be 0 for single-timer technologies", name));
  }
  if (fast_dormancy != FastDormancy::None && !(legacy_fd_timeout_s > 0.0)) {
    throw ConfigError(fmt::format("profile '{}': fast dormancy needs a positive timeout", name));
  }
}

double RadioProfile::require_p1() const {
  if (!p1_mw) throw ConfigError(fmt::format("profile '{}': p1_mw is not configured", name));
  return *p1_mw;
}

double RadioProfile::require_p2() const {
  if (!p2_mw) throw ConfigError(fmt::format("profile '{}': p2_mw is not configured", name));
  return *p2_mw;
}

}  // namespace estreamer
