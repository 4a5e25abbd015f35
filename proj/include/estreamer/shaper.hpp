#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "estreamer/profiler.hpp"
#include "estreamer/quality.hpp"

// Traffic shaper: Fast Start accounting, burst-size search, low-bandwidth
// fallback and quality switching.

namespace estreamer::shaping {

enum class Phase { FastStart, Searching, Steady, LowBandwidth };

std::string_view to_string(Phase p);

struct Quality {
  double bitrate_bps = 0.0;
  double init_header_bytes = 0.0;
  int height = 0;
  int width = 0;
};

struct StreamSpec {
  std::vector<Quality> qualities;  ///< strictly increasing bitrate
  double duration_s = 0.0;
  double fast_start_seconds = 30.0;  ///< content seconds sent unshaped

  /// Throws ConfigError on an empty or unsorted ladder or non-positive durations.
  void validate() const;
  std::vector<double> ladder() const;
};

struct ShaperConfig {
  double granularity_s = 1.0;
  double recovery_factor = 2.0;  ///< leave LOW_BANDWIDTH once est >= factor * r_s
  bool adaptive = false;
};

struct ShaperState {
  Phase phase = Phase::FastStart;
  double t_s = 0.0;
  double t_min_s = 0.0;
  double t_max_s = 0.0;
  std::optional<double> t_old_s;
  std::optional<double> bs_opt_bytes;
  double sent_bytes_total = 0.0;
  std::size_t current_quality_index = 0;
  std::map<std::size_t, double> per_quality_bs_opt;    ///< byte limits
  std::map<std::size_t, double> per_quality_interval;  ///< interval bounds inherited from a higher quality
  std::map<std::size_t, double> per_quality_seed;      ///< search seeds for higher qualities
  bool stall_risk = false;
  double low_bandwidth_sent_bytes = 0.0;
};

struct BurstPlan {
  std::uint64_t burst_id = 0;
  std::size_t quality_index = 0;
  double quality_bps = 0.0;
  double interval_s = 0.0;
  double bytes = 0.0;
  bool stop_on_zwa = false;  ///< abort at the first zero window, the rest is re-offered later
  bool continuous = false;   ///< send right after the previous burst instead of waiting
  Phase phase = Phase::FastStart;
};

struct Action {
  enum class Kind { SendBurst, SetBsOpt, Ignored };
  Kind kind = Kind::SendBurst;
  double interval_s = 0.0;
  std::optional<double> bs_opt_bytes;
};

struct BurstLogRow {
  std::uint64_t burst_id;
  double quality_bps;
  double t_s;
  double bytes;
  bool zwa;
  std::optional<double> bs_opt_bytes;
  Phase phase;
};

/// Header `burst_id,quality_bps,T_s,bytes,zwa,bs_opt_bytes,phase`.
std::string burst_log_csv(const std::vector<BurstLogRow>& rows);

class Shaper {
 public:
  explicit Shaper(StreamSpec spec, ShaperConfig config = {}, std::shared_ptr<const QualityPolicy> policy = nullptr);

  const ShaperState& state() const { return state_; }
  const StreamSpec& spec() const { return spec_; }
  const ShaperConfig& config() const { return config_; }
  /// Encoding rate of the current quality.
  double rate_bps() const;
  /// t_fs seconds of the starting quality.
  double fast_start_bytes() const;

  /// Plans the next burst. The plan's id must come back in the matching observation.
  BurstPlan next_burst();

  /// Feedback for the last planned burst. Observations for any other id are
  /// ignored and counted as warnings.
  Action on_burst_feedback(const profiling::BurstObservation& obs);

  /// Ends Fast Start without a zero window after `sent_bytes` (L). Returns T_max.
  double end_fast_start(double sent_bytes);

  /// Starts the interval search directly with the given upper bound.
  void begin_search(double t_max_s);

  /// Bandwidth estimate after a burst: quality switching and the low-bandwidth fallback.
  void on_bandwidth_change(double est_bps);

  /// Records a byte-limited (`byte_limited`) or interval-limited limit found at
  /// `quality` and spreads it over the ladder.
  const std::map<std::size_t, double>& propagate_bs_opt(std::size_t quality, double bs_opt_bytes, bool byte_limited);

  const std::vector<BurstLogRow>& log() const { return log_; }
  std::uint64_t warnings() const { return warnings_; }
  /// Feedback rounds spent in the current search.
  std::uint64_t search_rounds() const { return search_rounds_; }
  /// Intervals probed by the current search, in order.
  const std::vector<double>& probes() const { return probes_; }

 private:
  void set_steady(double bs_opt_bytes);
  void switch_quality(std::size_t to);
  double rate_of(std::size_t q) const { return spec_.qualities.at(q).bitrate_bps; }

  StreamSpec spec_;
  ShaperConfig config_;
  std::shared_ptr<const QualityPolicy> policy_;
  ShaperState state_;
  std::optional<BurstPlan> pending_;
  std::uint64_t next_id_ = 1;
  std::uint64_t warnings_ = 0;
  std::uint64_t search_rounds_ = 0;
  std::vector<double> probes_;
  std::vector<BurstLogRow> log_;
};

}  // namespace estreamer::shaping
