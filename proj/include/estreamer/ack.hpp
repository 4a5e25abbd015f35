#pragma once

namespace estreamer {

/// One TCP acknowledgement as seen by the sender.
struct AckEvent {
  double time_s = 0.0;
  double cum_ack_bytes = 0.0;  ///< cumulative bytes acknowledged since the session began
  double advertised_window_bytes = 0.0;

  bool zero_window() const { return advertised_window_bytes < 0.5; }
};

}  // namespace estreamer
