#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "estreamer/errors.hpp"
#include "estreamer/media_http.hpp"

namespace estreamer::http {
namespace {

const std::string kWire = std::string(ESTREAMER_SOURCE_DIR) + "/tests/data/wire/";

std::string fixture(const std::string& name) {
  std::ifstream f(kWire + name + ".txt", std::ios::binary);
  EXPECT_TRUE(f) << name;
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// A header block as it goes on the wire: CRLF lines and the empty terminator.
std::string on_wire(const std::string& text) { return normalize_crlf(text) + "\r\n"; }

bool is_request(const std::string& name) { return name.find("request") != std::string::npos; }

TEST(MediaHttp, EveryWireExampleRoundTrips) {
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(kWire)) names.push_back(e.path().stem().string());
  std::sort(names.begin(), names.end());
  ASSERT_EQ(names.size(), 12u);
  for (const auto& n : names) {
    SCOPED_TRACE(n);
    const std::string raw = fixture(n);
    const std::string rendered = is_request(n) ? render_request(parse_request(raw)) : render_response(parse_response(raw));
    EXPECT_EQ(rendered, on_wire(raw));
    // CRLF input parses to the same thing.
    const std::string again =
        is_request(n) ? render_request(parse_request(on_wire(raw))) : render_response(parse_response(on_wire(raw)));
    EXPECT_EQ(again, rendered);
  }
}

TEST(MediaHttp, StartRequest) {
  const auto r = parse_request(fixture("01_start_request"));
  EXPECT_EQ(r.path, "/BigBuckBunny");
  EXPECT_EQ(r.range_start_s, 0);
  EXPECT_FALSE(r.device_tag);
  EXPECT_EQ(parse_request(fixture("11_truncated_request")).range_start_s, 135);
  EXPECT_EQ(*parse_request(fixture("03_first_content_request")).device_tag, "ANDROID");
}

TEST(MediaHttp, InitResponseFields) {
  const auto r = parse_response(fixture("02_init_response"));
  EXPECT_EQ(r.status, 200);
  EXPECT_FALSE(r.version);
  EXPECT_EQ(*r.content_type, "video/mp4");
  EXPECT_EQ(*r.content_length_bytes, 128000);
  EXPECT_EQ(r.content_range->unit, ContentRange::Unit::Bytes);
  EXPECT_EQ(r.content_range->last, 127999);
  EXPECT_EQ(*r.stream_info->duration_s(), 597.0);
  EXPECT_EQ(*r.stream_info->bitrate_bps(), 700000.0);
  EXPECT_FALSE(r.stream_info->seconds()->last);
  EXPECT_EQ(*r.stream_info->height(), 480);
  EXPECT_EQ(*r.stream_info->width(), 853);
}

TEST(MediaHttp, PartialContentFields) {
  const auto r = parse_response(fixture("06_same_quality_response"));
  EXPECT_EQ(r.status, 206);
  EXPECT_EQ(r.reason, "OK Partial Content");
  EXPECT_EQ(*r.content_length_bytes, 3500000);
  EXPECT_EQ(r.content_range->to_string(), "seconds 60-99/40");
  EXPECT_EQ(*r.stream_info->bitrate_bps(), 700000.0);
  EXPECT_EQ(r.stream_info->seconds()->first, 60);
  EXPECT_EQ(*r.stream_info->seconds()->last, 99);
}

TEST(MediaHttp, SwitchResponseFields) {
  const auto r = parse_response(fixture("10_switch_content_response"));
  EXPECT_EQ(*r.stream_info->bitrate_bps(), 2000000.0);
  EXPECT_EQ(r.stream_info->get("seconds"), "100-139");
  EXPECT_EQ(*r.stream_info->height(), 720);
  const auto init = parse_response(fixture("08_switch_init_response"));
  EXPECT_EQ(init.content_range->unit, ContentRange::Unit::Bytes);
  EXPECT_EQ(init.stream_info->seconds()->first, 100);
}

TEST(MediaHttp, CorrectionResponse) {
  const auto r = parse_response(fixture("12_correction_response"));
  EXPECT_EQ(r.status, 204);
  EXPECT_FALSE(r.content_range);
  EXPECT_FALSE(r.content_length_bytes);
  EXPECT_EQ(r.stream_info->seconds()->first, 100);
  EXPECT_EQ(*r.stream_info->seconds()->last, 134);
}

TEST(MediaHttp, KeyOrderAndUnknownKeysKept) {
  const auto info = StreamInfo::parse("duration=597;bitrate=2000000; height=720; width=1280; seconds=100-139;fps=25");
  ASSERT_EQ(info.pairs().size(), 6u);
  EXPECT_EQ(info.pairs()[2].first, "height");
  EXPECT_EQ(info.pairs()[4].first, "seconds");
  EXPECT_EQ(*info.get("fps"), "25");
  EXPECT_FALSE(info.trailing_semicolon);
  EXPECT_EQ(info.to_string(), "duration=597;bitrate=2000000;height=720;width=1280;seconds=100-139;fps=25");
}

TEST(MediaHttp, RequestErrors) {
  EXPECT_THROW(parse_request("GET /x HTTP/1.1\nHost: h\n"), ProtocolError);
  EXPECT_THROW(parse_request("GET /x HTTP/1.1\nRange: seconds=10-20\n"), ProtocolError);
  EXPECT_THROW(parse_request("GET /x HTTP/1.1\nRange: bytes=0-\n"), ProtocolError);
  EXPECT_THROW(parse_request("GET /x HTTP/1.1\nRange: seconds=-5-\n"), ProtocolError);
  EXPECT_THROW(parse_request("GET /x HTTP/1.1\nRange: seconds=x-\n"), ProtocolError);
  EXPECT_THROW(parse_request("GET /x\nRange: seconds=0-\n"), ProtocolError);
  EXPECT_THROW(parse_request("GET /x HTTP/1.1\nnonsense\n"), ProtocolError);
}

TEST(MediaHttp, ResponseErrors) {
  const std::string range = "Content-Range: seconds 60-99/40\n";
  EXPECT_THROW(parse_response("206 OK\n" + range + "X-Stream-Info: duration=597;seconds=60-99;\n"), ProtocolError);
  EXPECT_THROW(parse_response("206 OK\n" + range + "X-Stream-Info: bitrate=7;seconds=60-98;\n"), ProtocolError);
  EXPECT_THROW(parse_response("206 OK\nContent-Range: seconds 60-99/597\nX-Stream-Info: bitrate=7;seconds=60-99;\n"),
               ProtocolError);
  EXPECT_THROW(parse_response("204 OK\nContent-Length: 10\nX-Stream-Info: bitrate=7;seconds=1-2;\n"), ProtocolError);
  EXPECT_THROW(parse_response("204 OK\nX-Stream-Info: bitrate=7;seconds=1-;\n"), ProtocolError);
  EXPECT_THROW(parse_response("404 Not Found\nX-Stream-Info: bitrate=7;\n"), ProtocolError);
  EXPECT_THROW(parse_response("206 OK\n" + range), ProtocolError);
  EXPECT_NO_THROW(parse_response("HTTP/1.1 206 OK\n" + range + "X-Stream-Info: bitrate=7;seconds=60-99;\n"));
}

TEST(MediaHttp, EditedFieldsAreRewritten) {
  auto r = parse_response(fixture("06_same_quality_response"));
  r.content_range = ContentRange{ContentRange::Unit::Seconds, 60, 79, 20};
  r.content_length_bytes = 1750000;
  r.stream_info->set("seconds", "60-79");
  const std::string out = render_response(r);
  EXPECT_NE(out.find("Content-Range: seconds 60-79/20\r\n"), std::string::npos);
  EXPECT_NE(out.find("Content-Length: 1750000\r\n"), std::string::npos);
  EXPECT_NE(out.find("Content-Type=video/mp4\r\n"), std::string::npos);
  EXPECT_EQ(render_response(parse_response(out)), out);

  auto q = parse_request(fixture("05_same_quality_request"));
  q.range_start_s = 60;
  EXPECT_NE(render_request(q).find("Range: seconds=60-\r\n"), std::string::npos);
}

const std::vector<QualityInfo> kLadder{{700000, 128000, 480, 853}, {2000000, 128000, 720, 1280}};

TEST(MediaHttp, BuildersMatchWireExamples) {
  EXPECT_EQ(StreamInfo::parse(make_init_response(kLadder[0], 597, 0).stream_info->to_string()),
            parse_response(fixture("02_init_response")).stream_info);
  const auto c = make_content_response(kLadder[1], 597, 100, 139, false);
  const auto w = parse_response(fixture("10_switch_content_response"));
  EXPECT_EQ(c.content_range, w.content_range);
  EXPECT_EQ(c.content_length_bytes, w.content_length_bytes);
  EXPECT_EQ(c.stream_info, w.stream_info);
  const auto fix = make_correction_response(kLadder[1], 597, 100, 134);
  EXPECT_EQ(fix.stream_info, parse_response(fixture("12_correction_response")).stream_info);
  EXPECT_EQ(make_content_response(kLadder[0], 597, 60, 99, false).content_length_bytes, 3500000);
}

// Full exchange: start, switch to 2 Mbit/s at 100 s, a burst cut after 35 s
// and the correction that brings the client back to 135.
TEST(MediaHttp, CorrectionFlowReanchorsAt135) {
  StreamResponder server(kLadder, 597);
  ReferenceClient client("/BigBuckBunny", "www.service-x.com", "ANDROID");

  auto req = client.next_request();
  EXPECT_EQ(render_request(req), on_wire(fixture("01_start_request")));
  auto resp = server.respond(parse_request(render_request(req)), 0, 60);
  EXPECT_EQ(resp.status, 200);
  EXPECT_EQ(resp.content_range->unit, ContentRange::Unit::Bytes);
  client.on_response(parse_response(render_response(resp)));
  EXPECT_EQ(client.next_start_s(), 0);

  req = client.next_request();
  EXPECT_EQ(render_request(req), on_wire(fixture("03_first_content_request")));
  resp = server.respond(req, 0, 60);
  EXPECT_EQ(resp.status, 200);
  EXPECT_EQ(resp.content_range->to_string(), "seconds 0-59/60");
  client.on_response(resp, resp.content_length_bytes);
  EXPECT_EQ(client.next_start_s(), 60);

  resp = server.respond(client.next_request(), 0, 40);
  EXPECT_EQ(resp.status, 206);
  client.on_response(resp, resp.content_length_bytes);
  EXPECT_EQ(client.next_start_s(), 100);

  // Quality switch: init for the new bitrate first, then the content.
  req = client.next_request();
  EXPECT_EQ(render_request(req), on_wire(fixture("07_switch_request")));
  resp = server.respond(req, 1, 40);
  EXPECT_EQ(resp.status, 200);
  EXPECT_EQ(*resp.stream_info->bitrate_bps(), 2e6);
  client.on_response(resp);
  EXPECT_EQ(client.next_start_s(), 100);
  resp = server.respond(client.next_request(), 1, 40);
  EXPECT_EQ(resp.content_range->to_string(), "seconds 100-139/40");

  // Flow control cut the burst after 35 s of content.
  server.truncate_last(35);
  client.on_response(resp, 35 * 2000000 / 8);
  req = client.next_request();
  EXPECT_EQ(req.range_start_s, 135);
  resp = server.respond(req, 1, 40);
  EXPECT_EQ(resp.status, 204);
  EXPECT_EQ(resp.stream_info->get("seconds"), "100-134");
  client.on_response(parse_response(render_response(resp)));
  EXPECT_EQ(client.corrections(), 1u);
  req = client.next_request();
  EXPECT_EQ(req.range_start_s, 135);
  resp = server.respond(req, 1, 40);
  EXPECT_EQ(resp.status, 206);
  EXPECT_EQ(resp.content_range->first, 135);
}

TEST(MediaHttp, NextRequestAfterAnyCorrection) {
  for (std::int64_t first : {0, 17, 300}) {
    for (std::int64_t last : {first, first + 3, first + 40}) {
      ReferenceClient c("/s", "h", "D");
      c.next_request();
      c.on_response(make_correction_response(kLadder[0], 597, first, last));
      EXPECT_EQ(c.next_request().range_start_s, last + 1);
    }
  }
}

TEST(MediaHttp, LowBufferThreshold) {
  ReferenceClient c("/s", "h", "D");
  EXPECT_TRUE(c.wants_more(5.0));
  EXPECT_FALSE(c.wants_more(5.5));
  ReferenceClient c2("/s", "h", "D", 2.0);
  EXPECT_FALSE(c2.wants_more(3.0));
}

}  // namespace
}  // namespace estreamer::http
