#pragma once

#include <cstdint>
#include <optional>

#include "estreamer/ack.hpp"

// Traffic profiler: turns the ACK / window stream of one burst into a
// burst observation for the shaper.

namespace estreamer::profiling {

struct BurstObservation {
  std::uint64_t burst_id = 0;
  double t_bd_s = 0.0;  ///< first to last ACK
  double acked_bytes = 0.0;
  bool complete = false;
  bool zwa_seen = false;
  std::optional<double> sent_bytes_at_first_zwa;  ///< bytes of this burst acknowledged at the first zero window
  double est_bandwidth_bps = 0.0;
  double first_ack_s = 0.0;
  double last_ack_s = 0.0;
};

/// bytes * 8 / t_bd. Throws DomainError unless t_bd > 0.
double estimate_bandwidth(double burst_bytes, double t_bd_s);

class Profiler {
 public:
  /// Starts tracking burst `id` covering cumulative bytes (start_seq, start_seq + size].
  /// `send_start_s` anchors the duration when a burst is acknowledged by a single ACK.
  void begin_burst(std::uint64_t id, double start_seq_bytes, double size_bytes, double send_start_s);

  /// Feeds one ACK. Returns the observation once the burst is fully acknowledged.
  /// ACKs at or below the burst start are stale and ignored; a decreasing
  /// cumulative ACK throws FeedError.
  std::optional<BurstObservation> ingest(const AckEvent& ack);

  /// Closes the current burst (complete or aborted) and returns what was seen.
  /// Empty when no burst is open or nothing was acknowledged.
  std::optional<BurstObservation> finish();

  bool open() const { return open_; }
  std::uint64_t stale_acks() const { return stale_; }

 private:
  BurstObservation build() const;

  bool open_ = false;
  std::uint64_t id_ = 0;
  double start_seq_ = 0.0;
  double size_ = 0.0;
  double send_start_s_ = 0.0;
  double last_cum_ = 0.0;
  bool any_ = false;
  double first_ack_s_ = 0.0;
  double first_ack_cum_ = 0.0;
  double last_ack_s_ = 0.0;
  bool zwa_ = false;
  double zwa_s_ = 0.0;
  double zwa_cum_ = 0.0;
  std::uint64_t stale_ = 0;
};

}  // namespace estreamer::profiling
