#pragma once

#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "estreamer/ack.hpp"
#include "estreamer/radio_sim.hpp"

// Simulated streaming client: one combined player + TCP receive buffer,
// drained at the encoding rate of the content at its head.

namespace estreamer::client {

/// Piecewise-constant link capacity.
class BandwidthTrace {
 public:
  BandwidthTrace() = default;
  /// Constant capacity.
  explicit BandwidthTrace(double bps);
  /// Steps of (time_s, bps). The first step must start at 0 and times must not
  /// decrease; of two steps at the same time the later one wins.
  explicit BandwidthTrace(std::vector<std::pair<double, double>> steps);

  double rate_at(double t) const;
  /// First change strictly after `t`, or +inf.
  double next_change_after(double t) const;
  const std::vector<std::pair<double, double>>& steps() const { return steps_; }

 private:
  std::vector<std::pair<double, double>> steps_;
};

struct ClientConfig {
  double buffer_capacity_bytes = 0.0;  ///< B
  double startup_threshold_s = 2.0;    ///< content needed before playback starts or resumes
  double segment_bytes = 1460.0;
  BandwidthTrace link;
};

struct Stall {
  double start_s;
  double end_s;
};

struct DeliveryResult {
  std::vector<AckEvent> acks;
  double requested_bytes = 0.0;
  double delivered_bytes = 0.0;
  double start_s = 0.0;
  double end_s = 0.0;
  bool zwa = false;
  double delivered_at_first_zwa = 0.0;  ///< within this delivery
  double first_zwa_s = 0.0;
  /// Constant-rate pieces of the transfer, for the radio model.
  std::vector<radio::ActiveInterval> spans;
};

class ClientSim {
 public:
  explicit ClientSim(ClientConfig config);

  /// Sends `bytes` of content encoded at `content_rate_bps`, starting at
  /// `start_s`, at min(at_rate_bps, link). Once the buffer is full the rest
  /// trickles in as playback frees space, unless `stop_on_zwa` aborts the
  /// transfer at the first zero window. Throws OrderingError for a start in
  /// the past.
  DeliveryResult deliver(double bytes, double at_rate_bps, double start_s, double content_rate_bps,
                         bool stop_on_zwa = false);

  /// Plays out until `to_s`.
  void advance(double to_s);

  /// No more content will arrive; playback may run the buffer dry without stalling.
  void end_of_stream();

  double now() const { return now_; }
  double capacity() const { return config_.buffer_capacity_bytes; }
  double occupancy() const { return occupancy_; }
  double advertised_window() const { return config_.buffer_capacity_bytes - occupancy_; }
  /// Encoding rate of the content at the head of the buffer, 0 when empty.
  double drain_rate() const;
  double buffered_content_s() const;
  bool playing() const { return playing_; }
  bool finished() const { return finished_; }
  double playback_position_s() const { return played_s_; }
  double delivered_bytes() const { return delivered_; }
  double drained_bytes() const { return drained_; }
  /// First playback start, or -1 before it.
  double playback_started_s() const { return started_at_; }
  const std::vector<Stall>& stall_log() const { return stalls_; }
  /// Header `start_s,end_s`.
  std::string stall_csv() const;

 private:
  struct Chunk {
    double bytes;
    double rate_bps;
  };

  void drain_for(double dt, double fill_bytes_into_tail);
  void try_start();
  void on_empty();
  double next_drain_event(double fill_rate_bps) const;

  ClientConfig config_;
  double now_ = 0.0;
  double occupancy_ = 0.0;
  std::deque<Chunk> chunks_;
  bool playing_ = false;
  bool finished_ = false;
  bool eos_ = false;
  double started_at_ = -1.0;
  double stall_since_ = -1.0;
  double delivered_ = 0.0;
  double drained_ = 0.0;
  double played_s_ = 0.0;
  std::vector<Stall> stalls_;
};

}  // namespace estreamer::client
