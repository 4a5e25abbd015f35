#include "estreamer/quality.hpp"

#include "estreamer/errors.hpp"

namespace estreamer::shaping {

std::size_t TwiceRatePolicy::initial(const std::vector<double>& ladder_bps) const {
  if (ladder_bps.empty()) throw PreconditionError("quality ladder is empty");
  std::size_t pick = 0;
  for (std::size_t i = 0; i < ladder_bps.size(); ++i) {
    if (ladder_bps[i] <= typical_bps_ / headroom_) pick = i;
  }
  return pick;
}

QualityDecision TwiceRatePolicy::select(double est_bps, std::size_t current, const std::vector<double>& ladder_bps) const {
  if (ladder_bps.empty()) throw PreconditionError("quality ladder is empty");
  if (current >= ladder_bps.size()) throw PreconditionError("current quality is outside the ladder");
  if (est_bps < ladder_bps[current]) {
    for (std::size_t i = current; i-- > 0;) {
      if (ladder_bps[i] <= est_bps) return {i, false};
    }
    return {0, true};
  }
  std::size_t pick = current;
  for (std::size_t i = current + 1; i < ladder_bps.size(); ++i) {
    if (est_bps >= headroom_ * ladder_bps[i]) pick = i;
  }
  return {pick, false};
}

}  // namespace estreamer::shaping
