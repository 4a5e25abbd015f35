#pragma once

#include <cstddef>
#include <vector>

// Quality selection for rate-adaptive sessions. Policies are pluggable.

namespace estreamer::shaping {

struct QualityDecision {
  std::size_t index = 0;
  bool stall_risk = false;  ///< bandwidth is below even the lowest quality
};

class QualityPolicy {
 public:
  virtual ~QualityPolicy() = default;
  /// Starting quality for a ladder sorted by increasing bitrate.
  virtual std::size_t initial(const std::vector<double>& ladder_bps) const = 0;
  virtual QualityDecision select(double est_bps, std::size_t current, const std::vector<double>& ladder_bps) const = 0;
};

/// Starts at the best quality within half the typical mobile bandwidth,
/// upgrades only with twice the next quality's rate, and downgrades to the
/// best sustainable quality.
class TwiceRatePolicy : public QualityPolicy {
 public:
  explicit TwiceRatePolicy(double typical_bandwidth_bps = 2e6, double headroom = 2.0)
      : typical_bps_(typical_bandwidth_bps), headroom_(headroom) {}

  std::size_t initial(const std::vector<double>& ladder_bps) const override;
  QualityDecision select(double est_bps, std::size_t current, const std::vector<double>& ladder_bps) const override;

 private:
  double typical_bps_;
  double headroom_;
};

}  // namespace estreamer::shaping
