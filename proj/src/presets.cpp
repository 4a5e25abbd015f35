#include "estreamer/presets.hpp"

namespace estreamer::presets {

namespace {

RadioProfile hspa_base(const char* name) {
  RadioProfile p;
  p.name = name;
  p.technology = Technology::Hspa;
  // CELL_DCH / CELL_FACH draw; chosen for simulation, the operators' values are unpublished.
  p.p1_mw = 800.0;
  p.p2_mw = 460.0;
  p.p_tail_mw = 800.0;
  p.a_coeff = 1.25;
  p.k_coeff = 0.0;
  p.promotion_energy_mj = 0.0;
  return p;
}

RadioProfile lte_base(const char* name) {
  RadioProfile p;
  p.name = name;
  p.technology = Technology::Lte;
  p.t1_s = 10.0;
  p.p1_mw = 1216.0;
  p.p_tail_mw = 1216.0;
  p.a_coeff = 2.25;  // 1216 * 1.25 = 1520 mW above tail at any rate
  p.k_coeff = 0.0;
  return p;
}

}  // namespace

RadioProfile wifi_analysis() {
  RadioProfile p;
  p.name = "wifi";
  p.technology = Technology::Wifi;
  p.t1_s = 0.2;
  p.p1_mw = 435.0;
  p.p_tail_mw = 435.0;
  p.a_coeff = 2.0;
  p.k_coeff = (760.0 - 435.0) / (435.0 * kWifiBulkRateBps);
  return p;
}

RadioProfile lte_analysis() { return lte_base("lte_analysis"); }

RadioProfile hspa_default() {
  RadioProfile p = hspa_base("hspa_default");
  p.t1_s = 8.0;
  p.t2_s = 3.0;
  p.t3_s = 29.0 * 60.0;
  p.pch_enabled = true;
  return p;
}

RadioProfile hspa_aggressive() {
  RadioProfile p = hspa_base("hspa_aggressive");
  p.t1_s = 6.0;
  p.t2_s = 2.0;
  p.t3_s = 29.0 * 60.0;
  p.pch_enabled = true;
  return p;
}

RadioProfile hspa_no_pch() {
  RadioProfile p = hspa_base("hspa_nopch");
  p.t1_s = 8.0;
  p.t2_s = 10.0;
  p.t3_s = 0.0;
  p.pch_enabled = false;
  return p;
}

RadioProfile lte_no_drx() {
  RadioProfile p = lte_base("lte_nodrx");
  // RRC connection setup: ~260 ms at ~1210 mW.
  p.promotion_energy_mj = 315.0;
  return p;
}

RadioProfile lte_drx() {
  RadioProfile p = lte_no_drx();
  p.name = "lte_drx";
  p.drx = DrxConfig{750.0, 640.0, 20.0};
  return p;
}

RadioProfile lte_drx_long_idle() {
  RadioProfile p = lte_drx();
  p.name = "lte_drx_long";
  p.t1_s = 20.0;
  return p;
}

RadioProfile with_legacy_fd(RadioProfile base, double timeout_s) {
  base.name += "+legacy_fd";
  base.fast_dormancy = FastDormancy::Legacy;
  base.legacy_fd_timeout_s = timeout_s;
  return base;
}

RadioProfile with_rel8_fd(RadioProfile base, double timeout_s) {
  base.name += "+rel8_fd";
  base.fast_dormancy = FastDormancy::Rel8;
  base.legacy_fd_timeout_s = timeout_s;
  return base;
}

}  // namespace estreamer::presets
