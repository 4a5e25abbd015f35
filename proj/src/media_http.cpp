#include "estreamer/media_http.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <regex>

#include "estreamer/errors.hpp"

namespace estreamer::http {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

bool is_blank(char c) { return c == ' ' || c == '\t'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_blank(s.back())) s.remove_suffix(1);
  return s;
}

std::int64_t parse_int(std::string_view s, std::string_view what) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) throw ProtocolError(fmt::format("{}: '{}' is not an integer", what, s));
  return v;
}

std::vector<std::string_view> split_lines(std::string_view raw) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    const std::size_t nl = raw.find('\n', pos);
    std::string_view line = raw.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) break;  // end of the header block
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lines;
}

void set_value(HeaderField& h, std::string_view v) {
  std::size_t end = v.size();
  while (end > 0 && is_blank(v[end - 1])) --end;
  h.value = std::string(v.substr(0, end));
  h.trailing = std::string(v.substr(end));
}

std::vector<HeaderField> parse_headers(const std::vector<std::string_view>& lines, std::size_t from) {
  std::vector<HeaderField> out;
  for (std::size_t i = from; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (!out.empty()) {
      HeaderField& prev = out.back();
      // X-Stream-Info lists wrap without leading blanks when the value ends in ';'.
      const bool wrapped = iequals(prev.name, "X-Stream-Info") && !prev.value.empty() && prev.value.back() == ';';
      if (is_blank(line.front()) || wrapped) {
        std::string joined = prev.value + prev.trailing;
        prev.folds.push_back(joined.size());
        joined += line;
        set_value(prev, joined);
        continue;
      }
    }
    std::size_t n = 0;
    while (n < line.size() && (std::isalnum(static_cast<unsigned char>(line[n])) || line[n] == '-' || line[n] == '_')) ++n;
    std::size_t s = n;
    while (s < line.size() && is_blank(line[s])) ++s;
    if (n == 0 || s >= line.size() || (line[s] != ':' && line[s] != '=')) {
      throw ProtocolError(fmt::format("malformed header line '{}'", line));
    }
    ++s;
    while (s < line.size() && is_blank(line[s])) ++s;
    HeaderField h;
    h.name = std::string(line.substr(0, n));
    h.separator = std::string(line.substr(n, s - n));
    set_value(h, line.substr(s));
    out.push_back(std::move(h));
  }
  return out;
}

const HeaderField* find_header(const std::vector<HeaderField>& hs, std::string_view name) {
  for (const auto& h : hs) {
    if (iequals(h.name, name)) return &h;
  }
  return nullptr;
}

void render_header(std::string& out, const HeaderField& h) {
  out += h.name;
  out += h.separator;
  std::size_t pos = 0;
  for (std::size_t f : h.folds) {
    out.append(h.value, pos, f - pos);
    out += "\r\n";
    pos = f;
  }
  out.append(h.value, pos, std::string::npos);
  out += h.trailing;
  out += "\r\n";
}

/// Brings header `name` in line with a typed field: unchanged values keep
/// their layout, changed ones are rewritten, absent ones removed or appended.
template <typename Same>
void sync_header(std::vector<HeaderField>& hs, std::string_view name, const std::optional<std::string>& canonical,
                 Same same) {
  auto it = std::find_if(hs.begin(), hs.end(), [&](const HeaderField& h) { return iequals(h.name, name); });
  if (!canonical) {
    if (it != hs.end()) hs.erase(it);
    return;
  }
  if (it == hs.end()) {
    hs.push_back({std::string(name), ": ", *canonical, "", {}});
    return;
  }
  bool keep = false;
  try {
    keep = same(it->value);
  } catch (const ProtocolError&) {
    keep = false;
  }
  if (!keep) {
    it->value = *canonical;
    it->trailing.clear();
    it->folds.clear();
  }
}

const std::regex& range_re() {
  static const std::regex re(R"(seconds=(\d+)-)");
  return re;
}

ContentRange parse_content_range(std::string_view v) {
  static const std::regex re(R"((seconds|bytes) (\d+)-(\d+)/(\d+))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(v.begin(), v.end(), m, re)) throw ProtocolError(fmt::format("malformed Content-Range '{}'", v));
  ContentRange r;
  r.unit = m[1] == "bytes" ? ContentRange::Unit::Bytes : ContentRange::Unit::Seconds;
  r.first = parse_int(std::string_view(&*m[2].first, m[2].length()), "Content-Range");
  r.last = parse_int(std::string_view(&*m[3].first, m[3].length()), "Content-Range");
  r.length = parse_int(std::string_view(&*m[4].first, m[4].length()), "Content-Range");
  if (r.last < r.first) throw ProtocolError(fmt::format("Content-Range '{}' ends before it starts", v));
  return r;
}

void validate_response(const StreamResponse& r) {
  if (r.status != 200 && r.status != 206 && r.status != 204) {
    throw ProtocolError(fmt::format("unsupported status {}", r.status));
  }
  if (!r.stream_info) throw ProtocolError("response lacks X-Stream-Info");
  const auto& info = *r.stream_info;
  if (!info.bitrate_bps()) throw ProtocolError("X-Stream-Info lacks bitrate");
  const auto secs = info.seconds();
  if (r.status == 204) {
    if (r.content_range) throw ProtocolError("204 must not carry Content-Range");
    if (r.content_length_bytes.value_or(0) != 0) throw ProtocolError("204 must not declare a body");
    if (!secs || !secs->last) throw ProtocolError("204 needs a closed seconds range as correction");
    if (*secs->last < secs->first) throw ProtocolError("204 correction ends before it starts");
    return;
  }
  if (!r.content_range) throw ProtocolError(fmt::format("{} without Content-Range", r.status));
  const auto& cr = *r.content_range;
  if (cr.unit == ContentRange::Unit::Seconds) {
    if (!secs || !secs->last || secs->first != cr.first || *secs->last != cr.last) {
      throw ProtocolError(fmt::format("X-Stream-Info seconds '{}' do not match Content-Range '{}'",
                                      secs ? secs->to_string() : std::string("-"), cr.to_string()));
    }
    if (cr.length != cr.last - cr.first + 1) {
      throw ProtocolError(fmt::format("Content-Range '{}' length is not the chunk length", cr.to_string()));
    }
  } else {
    if (cr.last >= cr.length) throw ProtocolError(fmt::format("Content-Range '{}' exceeds its total", cr.to_string()));
    if (r.content_length_bytes && *r.content_length_bytes != cr.last - cr.first + 1) {
      throw ProtocolError("Content-Length does not match the byte range");
    }
    if (secs && secs->last) throw ProtocolError("an initialization response takes an open seconds range");
  }
}

std::string fmt_num(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return fmt::format("{}", static_cast<std::int64_t>(v));
  return fmt::format("{}", v);
}

}  // namespace

std::string ContentRange::to_string() const {
  return fmt::format("{} {}-{}/{}", unit == Unit::Seconds ? "seconds" : "bytes", first, last, length);
}

std::string SecondsSpan::to_string() const {
  return last ? fmt::format("{}-{}", first, *last) : fmt::format("{}-", first);
}

StreamInfo StreamInfo::parse(std::string_view value) {
  StreamInfo info;
  const std::string_view v = trim(value);
  info.trailing_semicolon = !v.empty() && v.back() == ';';
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const std::size_t semi = v.find(';', pos);
    const std::string_view piece = trim(v.substr(pos, semi == std::string_view::npos ? std::string_view::npos : semi - pos));
    if (!piece.empty()) {
      const std::size_t eq = piece.find('=');
      if (eq == std::string_view::npos) throw ProtocolError(fmt::format("X-Stream-Info entry '{}' is not key=value", piece));
      info.pairs_.emplace_back(std::string(trim(piece.substr(0, eq))), std::string(trim(piece.substr(eq + 1))));
    }
    if (semi == std::string_view::npos) break;
    pos = semi + 1;
  }
  return info;
}

std::optional<std::string> StreamInfo::get(std::string_view key) const {
  for (const auto& [k, v] : pairs_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void StreamInfo::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : pairs_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  pairs_.emplace_back(key, value);
}

std::optional<double> StreamInfo::duration_s() const {
  auto v = get("duration");
  if (!v) return std::nullopt;
  return static_cast<double>(parse_int(*v, "duration"));
}

std::optional<double> StreamInfo::bitrate_bps() const {
  auto v = get("bitrate");
  if (!v) return std::nullopt;
  const auto b = parse_int(*v, "bitrate");
  if (b <= 0) throw ProtocolError("bitrate must be > 0");
  return static_cast<double>(b);
}

std::optional<SecondsSpan> StreamInfo::seconds() const {
  auto v = get("seconds");
  if (!v) return std::nullopt;
  const std::size_t dash = v->find('-');
  if (dash == std::string::npos) throw ProtocolError(fmt::format("seconds '{}' is not a range", *v));
  SecondsSpan s;
  s.first = parse_int(std::string_view(*v).substr(0, dash), "seconds");
  if (dash + 1 < v->size()) s.last = parse_int(std::string_view(*v).substr(dash + 1), "seconds");
  return s;
}

std::optional<int> StreamInfo::height() const {
  auto v = get("height");
  if (!v) return std::nullopt;
  return static_cast<int>(parse_int(*v, "height"));
}

std::optional<int> StreamInfo::width() const {
  auto v = get("width");
  if (!v) return std::nullopt;
  return static_cast<int>(parse_int(*v, "width"));
}

std::string StreamInfo::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (i > 0) out += ';';
    out += pairs_[i].first + "=" + pairs_[i].second;
  }
  if (trailing_semicolon) out += ';';
  return out;
}

std::string normalize_crlf(std::string_view s) {
  std::string out;
  out.reserve(s.size() + s.size() / 16);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\n' && (i == 0 || s[i - 1] != '\r')) out += '\r';
    out += s[i];
  }
  return out;
}

StreamRequest parse_request(std::string_view raw) {
  const auto lines = split_lines(raw);
  if (lines.empty()) throw ProtocolError("empty request");
  static const std::regex line_re(R"((\S+) (\S+) (HTTP/\d\.\d))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(lines[0].begin(), lines[0].end(), m, line_re)) {
    throw ProtocolError(fmt::format("malformed request line '{}'", lines[0]));
  }
  StreamRequest req;
  req.method = m[1].str();
  req.path = m[2].str();
  req.version = m[3].str();
  req.headers = parse_headers(lines, 1);
  const auto* range = find_header(req.headers, "Range");
  if (!range) throw ProtocolError("request lacks a Range header");
  std::smatch rm;
  if (!std::regex_match(range->value, rm, range_re())) {
    throw ProtocolError(fmt::format("Range '{}' is not an open seconds range", range->value));
  }
  req.range_start_s = parse_int(rm[1].str(), "Range");
  if (const auto* dev = find_header(req.headers, "X-Device")) req.device_tag = dev->value;
  return req;
}

std::string render_request(const StreamRequest& req) {
  if (req.range_start_s < 0) throw ProtocolError("range start must be >= 0");
  auto hs = req.headers;
  sync_header(hs, "Range", fmt::format("seconds={}-", req.range_start_s), [&](const std::string& v) {
    std::smatch m;
    return std::regex_match(v, m, range_re()) && parse_int(m[1].str(), "Range") == req.range_start_s;
  });
  sync_header(hs, "X-Device", req.device_tag, [&](const std::string& v) { return v == *req.device_tag; });
  std::string out = fmt::format("{} {} {}\r\n", req.method, req.path, req.version);
  for (const auto& h : hs) render_header(out, h);
  out += "\r\n";
  return out;
}

StreamResponse parse_response(std::string_view raw) {
  const auto lines = split_lines(raw);
  if (lines.empty()) throw ProtocolError("empty response");
  static const std::regex status_re(R"((?:(HTTP/\d\.\d) )?(\d{3})(?: (.*))?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(lines[0].begin(), lines[0].end(), m, status_re)) {
    throw ProtocolError(fmt::format("malformed status line '{}'", lines[0]));
  }
  StreamResponse r;
  if (m[1].matched) r.version = m[1].str();
  r.status = static_cast<int>(parse_int(m[2].str(), "status"));
  r.reason = m[3].matched ? m[3].str() : std::string();
  r.headers = parse_headers(lines, 1);
  if (const auto* h = find_header(r.headers, "Content-Type")) r.content_type = h->value;
  if (const auto* h = find_header(r.headers, "Content-Length")) r.content_length_bytes = parse_int(h->value, "Content-Length");
  if (const auto* h = find_header(r.headers, "Content-Range")) r.content_range = parse_content_range(h->value);
  if (const auto* h = find_header(r.headers, "X-Stream-Info")) r.stream_info = StreamInfo::parse(h->value);
  validate_response(r);
  return r;
}

std::string render_response(const StreamResponse& resp) {
  validate_response(resp);
  auto hs = resp.headers;
  sync_header(hs, "Content-Type", resp.content_type, [&](const std::string& v) { return v == *resp.content_type; });
  sync_header(hs, "Content-Length",
              resp.content_length_bytes ? std::optional(fmt::format("{}", *resp.content_length_bytes)) : std::nullopt,
              [&](const std::string& v) { return parse_int(v, "Content-Length") == *resp.content_length_bytes; });
  sync_header(hs, "Content-Range", resp.content_range ? std::optional(resp.content_range->to_string()) : std::nullopt,
              [&](const std::string& v) { return parse_content_range(v) == *resp.content_range; });
  sync_header(hs, "X-Stream-Info", resp.stream_info ? std::optional(resp.stream_info->to_string()) : std::nullopt,
              [&](const std::string& v) { return StreamInfo::parse(v) == *resp.stream_info; });
  std::string out;
  if (resp.version) out += *resp.version + " ";
  out += fmt::format("{}", resp.status);
  if (!resp.reason.empty()) out += " " + resp.reason;
  out += "\r\n";
  for (const auto& h : hs) render_header(out, h);
  out += "\r\n";
  return out;
}

StreamRequest make_request(const std::string& path, const std::string& host, std::int64_t start_s,
                           const std::optional<std::string>& device_tag, bool accept_any) {
  StreamRequest r;
  r.path = path;
  r.range_start_s = start_s;
  r.device_tag = device_tag;
  r.headers.push_back({"Host", ": ", host, "", {}});
  if (accept_any) r.headers.push_back({"Accept", ": ", "*/*", "", {}});
  r.headers.push_back({"Range", ": ", fmt::format("seconds={}-", start_s), "", {}});
  if (device_tag) r.headers.push_back({"X-Device", ": ", *device_tag, "", {}});
  return r;
}

namespace {

StreamInfo info_for(const QualityInfo& q, double duration_s, const SecondsSpan& span) {
  StreamInfo info;
  info.trailing_semicolon = false;
  info.set("duration", fmt_num(duration_s));
  info.set("bitrate", fmt_num(q.bitrate_bps));
  info.set("seconds", span.to_string());
  info.set("height", fmt::format("{}", q.height));
  info.set("width", fmt::format("{}", q.width));
  return info;
}

}  // namespace

StreamResponse make_init_response(const QualityInfo& q, double duration_s, std::int64_t from_s) {
  if (q.init_header_bytes <= 0) throw ProtocolError("initialization header must have a length");
  StreamResponse r;
  r.status = 200;
  r.reason = "OK";
  r.content_type = "video/mp4";
  r.content_length_bytes = q.init_header_bytes;
  r.content_range = ContentRange{ContentRange::Unit::Bytes, 0, q.init_header_bytes - 1, q.init_header_bytes};
  r.stream_info = info_for(q, duration_s, {from_s, std::nullopt});
  return r;
}

StreamResponse make_content_response(const QualityInfo& q, double duration_s, std::int64_t first, std::int64_t last,
                                     bool first_content) {
  if (last < first) throw ProtocolError("content range ends before it starts");
  StreamResponse r;
  r.status = first_content ? 200 : 206;
  r.reason = first_content ? "OK" : "OK Partial Content";
  r.content_type = "video/mp4";
  const std::int64_t secs = last - first + 1;
  r.content_length_bytes = static_cast<std::int64_t>(std::llround(static_cast<double>(secs) * q.bitrate_bps / 8.0));
  r.content_range = ContentRange{ContentRange::Unit::Seconds, first, last, secs};
  r.stream_info = info_for(q, duration_s, {first, last});
  return r;
}

StreamResponse make_correction_response(const QualityInfo& q, double duration_s, std::int64_t first,
                                        std::int64_t last) {
  StreamResponse r;
  r.status = 204;
  r.reason = "OK";
  r.stream_info = info_for(q, duration_s, {first, last});
  return r;
}

StreamResponder::StreamResponder(std::vector<QualityInfo> ladder, double duration_s)
    : ladder_(std::move(ladder)), duration_s_(duration_s) {
  if (ladder_.empty()) throw ConfigError("responder needs at least one quality");
  if (!(duration_s_ > 0.0)) throw ConfigError("stream duration must be > 0");
}

StreamResponse StreamResponder::respond(const StreamRequest& req, std::size_t quality, std::int64_t chunk_s) {
  if (quality >= ladder_.size()) throw PreconditionError("quality is outside the ladder");
  if (pending_correction_) {
    const SecondsSpan c = *pending_correction_;
    pending_correction_.reset();
    return make_correction_response(ladder_[last_quality_], duration_s_, c.first, *c.last);
  }
  if (init_quality_ != quality) {
    init_quality_ = quality;
    return make_init_response(ladder_[quality], duration_s_, req.range_start_s);
  }
  const auto end = static_cast<std::int64_t>(std::ceil(duration_s_)) - 1;
  if (req.range_start_s > end) throw ProtocolError(fmt::format("range start {} is past the end of the stream", req.range_start_s));
  if (chunk_s <= 0) throw PreconditionError("chunk must be at least one second");
  const std::int64_t last = std::min(req.range_start_s + chunk_s - 1, end);
  auto r = make_content_response(ladder_[quality], duration_s_, req.range_start_s, last, !sent_content_);
  sent_content_ = true;
  last_range_ = r.content_range;
  last_quality_ = quality;
  return r;
}

void StreamResponder::truncate_last(std::int64_t delivered_s) {
  if (!last_range_) throw PreconditionError("no content response to truncate");
  if (delivered_s <= 0 || delivered_s >= last_range_->length) {
    throw PreconditionError(fmt::format("cannot truncate {} s of a {} s chunk", delivered_s, last_range_->length));
  }
  pending_correction_ = SecondsSpan{last_range_->first, last_range_->first + delivered_s - 1};
}

ReferenceClient::ReferenceClient(std::string path, std::string host, std::string device_tag, double low_buffer_s)
    : path_(std::move(path)), host_(std::move(host)), device_tag_(std::move(device_tag)), low_buffer_s_(low_buffer_s) {
  if (!(low_buffer_s_ >= 0.0)) throw ConfigError("low-buffer threshold must be >= 0");
}

StreamRequest ReferenceClient::next_request() {
  if (first_) {
    first_ = false;
    return make_request(path_, host_, next_start_s_, std::nullopt, false);
  }
  return make_request(path_, host_, next_start_s_, device_tag_, true);
}

void ReferenceClient::on_response(const StreamResponse& resp, std::optional<std::int64_t> body_bytes) {
  validate_response(resp);
  const auto& info = *resp.stream_info;
  bitrate_bps_ = info.bitrate_bps();
  if (resp.status == 204) {
    ++corrections_;
    next_start_s_ = *info.seconds()->last + 1;
    return;
  }
  const auto& cr = *resp.content_range;
  if (cr.unit == ContentRange::Unit::Bytes) return;  // init header, ask again for the same seconds
  std::int64_t got = cr.length;
  if (body_bytes) {
    const double secs = static_cast<double>(*body_bytes) * 8.0 / *bitrate_bps_;
    got = std::min<std::int64_t>(cr.length, static_cast<std::int64_t>(std::floor(secs + 1e-9)));
  }
  next_start_s_ = cr.first + got;
}

}  // namespace estreamer::http
