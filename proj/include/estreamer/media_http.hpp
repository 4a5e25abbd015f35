#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// HTTP extension for shaped rate-adaptive streaming: seconds-based Range
// requests and X-Stream-Info responses.
//
// Parsed messages keep their header layout (separator spelling, trailing
// blanks, folded lines) so render(parse(x)) reproduces x. Rendering always
// uses CRLF; the parser accepts LF.

namespace estreamer::http {

/// One header as it appeared on the wire.
struct HeaderField {
  std::string name;
  std::string separator = ": ";  ///< e.g. ": ", "=", " = "
  std::string value;             ///< logical value, folds removed
  std::string trailing;          ///< blanks after the value on its last line
  std::vector<std::size_t> folds;  ///< offsets in `value` where the line was broken
};

/// `seconds a-b/n` or `bytes a-b/n`. For seconds the wire format puts the
/// chunk length after the slash, not the stream total.
struct ContentRange {
  enum class Unit { Seconds, Bytes };
  Unit unit = Unit::Seconds;
  std::int64_t first = 0;
  std::int64_t last = 0;
  std::int64_t length = 0;

  std::string to_string() const;
  bool operator==(const ContentRange&) const = default;
};

/// `seconds=a-` or `seconds=a-b` inside X-Stream-Info.
struct SecondsSpan {
  std::int64_t first = 0;
  std::optional<std::int64_t> last;

  std::string to_string() const;
  bool operator==(const SecondsSpan&) const = default;
};

/// Ordered `key=value` list. Unknown keys are kept as they are.
class StreamInfo {
 public:
  StreamInfo() = default;
  static StreamInfo parse(std::string_view value);

  std::optional<std::string> get(std::string_view key) const;
  void set(const std::string& key, const std::string& value);

  std::optional<double> duration_s() const;
  std::optional<double> bitrate_bps() const;
  std::optional<SecondsSpan> seconds() const;
  std::optional<int> height() const;
  std::optional<int> width() const;

  const std::vector<std::pair<std::string, std::string>>& pairs() const { return pairs_; }
  /// Canonical form: `k=v;k=v;` (trailing `;` as parsed).
  std::string to_string() const;
  bool operator==(const StreamInfo&) const = default;

  bool trailing_semicolon = true;

 private:
  std::vector<std::pair<std::string, std::string>> pairs_;
};

struct StreamRequest {
  std::string method = "GET";
  std::string path;
  std::string version = "HTTP/1.1";
  std::int64_t range_start_s = 0;
  std::optional<std::string> device_tag;  ///< X-Device
  std::vector<HeaderField> headers;       ///< in wire order, Range included
};

struct StreamResponse {
  std::optional<std::string> version;  ///< status lines may omit it
  int status = 200;
  std::string reason = "OK";
  std::optional<std::string> content_type;
  std::optional<std::int64_t> content_length_bytes;
  std::optional<ContentRange> content_range;
  std::optional<StreamInfo> stream_info;
  std::vector<HeaderField> headers;
};

/// Throws ProtocolError on a missing or malformed Range header, a closed or
/// negative range, or a broken request line.
StreamRequest parse_request(std::string_view raw);
std::string render_request(const StreamRequest& req);

/// Throws ProtocolError on a status outside {200, 206, 204}, an X-Stream-Info
/// without bitrate, seconds inconsistent with Content-Range, or a 204 that
/// declares a body.
StreamResponse parse_response(std::string_view raw);
std::string render_response(const StreamResponse& resp);

/// LF -> CRLF, leaving existing CRLF alone.
std::string normalize_crlf(std::string_view s);

// Builders for freshly generated messages.
StreamRequest make_request(const std::string& path, const std::string& host, std::int64_t start_s,
                           const std::optional<std::string>& device_tag, bool accept_any);

struct QualityInfo {
  double bitrate_bps = 0.0;
  std::int64_t init_header_bytes = 0;
  int height = 0;
  int width = 0;
};

/// 200 carrying the initialization header of `q`, valid from `from_s` on.
StreamResponse make_init_response(const QualityInfo& q, double duration_s, std::int64_t from_s);
/// 200 (first content) or 206 for seconds [first, last].
StreamResponse make_content_response(const QualityInfo& q, double duration_s, std::int64_t first, std::int64_t last,
                                     bool first_content);
/// 204 telling the client what was really delivered: seconds [first, last].
StreamResponse make_correction_response(const QualityInfo& q, double duration_s, std::int64_t first,
                                        std::int64_t last);

/// Server side of the exchange, one per client session.
class StreamResponder {
 public:
  StreamResponder(std::vector<QualityInfo> ladder, double duration_s);

  /// Answers a request with `chunk_s` seconds at `quality`. A quality not yet
  /// initialized for this client gets its 200 init response first; the client
  /// then repeats the request.
  StreamResponse respond(const StreamRequest& req, std::size_t quality, std::int64_t chunk_s);

  /// The last content response was cut after `delivered_s` seconds. The next
  /// request is answered with a 204 correction.
  void truncate_last(std::int64_t delivered_s);

  std::optional<std::size_t> initialized_quality() const { return init_quality_; }

 private:
  std::vector<QualityInfo> ladder_;
  double duration_s_;
  std::optional<std::size_t> init_quality_;
  bool sent_content_ = false;
  std::optional<SecondsSpan> pending_correction_;
  std::optional<ContentRange> last_range_;
  std::size_t last_quality_ = 0;
};

/// Reference client: asks for more when the buffer drops to the threshold,
/// re-anchors after a 204 and re-requests after an init response.
class ReferenceClient {
 public:
  ReferenceClient(std::string path, std::string host, std::string device_tag, double low_buffer_s = 5.0);

  /// Next request to send.
  StreamRequest next_request();
  /// Feeds a response. `body_bytes` is what actually arrived for content responses.
  void on_response(const StreamResponse& resp, std::optional<std::int64_t> body_bytes = std::nullopt);

  /// True when buffered content has fallen to the threshold.
  bool wants_more(double buffered_s) const { return buffered_s <= low_buffer_s_; }

  std::int64_t next_start_s() const { return next_start_s_; }
  std::optional<double> bitrate_bps() const { return bitrate_bps_; }
  std::uint64_t corrections() const { return corrections_; }

 private:
  std::string path_;
  std::string host_;
  std::string device_tag_;
  double low_buffer_s_;
  bool first_ = true;
  std::int64_t next_start_s_ = 0;
  std::optional<double> bitrate_bps_;
  std::uint64_t corrections_ = 0;
};

}  // namespace estreamer::http
