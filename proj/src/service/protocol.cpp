// Copyright 2026 The ToOT Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "protocol.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>
#include <openssl/evp.h>

#include "error.hpp"

namespace toot::proto {

namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

[[noreturn]] void bad_field(std::string_view field, std::string_view what) {
  fail(ErrorKind::kProtocol, "field '" + std::string(field) + "': " + std::string(what));
}

// `path` names the field in errors when it is nested.
const json& field(const json& obj, std::string_view name, std::string_view path = {}) {
  auto it = obj.find(name);
  if (it == obj.end()) bad_field(path.empty() ? name : path, "missing");
  return *it;
}

const json* optional_field(const json& obj, std::string_view name) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

std::int64_t get_int(const json& j, std::string_view name) {
  if (!j.is_number_integer()) bad_field(name, "expected integer");
  if (j.is_number_unsigned() && j.get<std::uint64_t>() > std::uint64_t(INT64_MAX))
    bad_field(name, "out of range");
  return j.get<std::int64_t>();
}

std::uint64_t get_uint(const json& j, std::string_view name) {
  if (!j.is_number_integer()) bad_field(name, "expected integer");
  if (!j.is_number_unsigned() && j.get<std::int64_t>() < 0) bad_field(name, "must be >= 0");
  return j.get<std::uint64_t>();
}

int get_int32(const json& j, std::string_view name) {
  std::int64_t v = get_int(j, name);
  if (v < INT32_MIN || v > INT32_MAX) bad_field(name, "out of range");
  return int(v);
}

double get_double(const json& j, std::string_view name) {
  if (!j.is_number()) bad_field(name, "expected number");
  double v = j.get<double>();
  if (!std::isfinite(v)) bad_field(name, "not finite");
  return v;
}

std::string get_string(const json& j, std::string_view name) {
  if (!j.is_string()) bad_field(name, "expected string");
  return j.get<std::string>();
}

double number_at(const json& obj, std::string_view name, std::string_view path) {
  return get_double(field(obj, name, path), path);
}

json parse_object(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::kProtocol, "message is not valid JSON");
  if (!j.is_object()) fail(ErrorKind::kProtocol, "message is not a JSON object");
  return j;
}

std::int64_t get_seq(const json& obj) {
  std::int64_t seq = get_int(field(obj, "seq"), "seq");
  if (seq < 0) bad_field("seq", "must be >= 0");
  return seq;
}

TrackStatus parse_status(const std::string& s) {
  if (s == "idle") return TrackStatus::kIdle;
  if (s == "active") return TrackStatus::kActive;
  if (s == "failed") return TrackStatus::kFailed;
  bad_field("tracker.status", "unknown status '" + s + "'");
}

ControlAction parse_action(const std::string& s) {
  if (s == "start") return ControlAction::kStart;
  if (s == "pause") return ControlAction::kPause;
  if (s == "reset") return ControlAction::kReset;
  if (s == "step") return ControlAction::kStep;
  bad_field("action", "unknown action '" + s + "'");
}

ojson encode_frame(const FrameMessage& m) {
  ojson j;
  j["type"] = "frame";
  j["seq"] = m.seq;
  j["frame_index"] = m.frame_index;
  j["image"] = m.image;
  j["cam"] = m.cam;
  j["scores"] = ojson{{"positive", m.scores.positive}, {"negative", m.scores.negative}};
  j["model_version"] = m.model_version;
  ojson t;
  t["status"] = to_string(m.tracker.status);
  if (m.tracker.bbox) {
    const NormBox& b = *m.tracker.bbox;
    t["bbox"] = ojson{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}};
  }
  j["tracker"] = t;
  if (m.accuracy) j["accuracy"] = *m.accuracy;
  return j;
}

FrameMessage decode_frame(const json& j) {
  FrameMessage m;
  m.seq = get_seq(j);
  m.frame_index = get_int32(field(j, "frame_index"), "frame_index");
  m.image = get_string(field(j, "image"), "image");

  const json& cam = field(j, "cam");
  if (!cam.is_array()) bad_field("cam", "expected array");
  for (const json& row : cam) {
    if (!row.is_array() || row.size() != cam.size()) bad_field("cam", "expected square array");
    std::vector<double> r;
    for (const json& v : row) {
      double x = get_double(v, "cam");
      if (x < 0.0 || x > 1.0) bad_field("cam", "value outside [0,1]");
      r.push_back(x);
    }
    m.cam.push_back(std::move(r));
  }

  const json& scores = field(j, "scores");
  if (!scores.is_object()) bad_field("scores", "expected object");
  m.scores.positive = number_at(scores, "positive", "scores.positive");
  m.scores.negative = number_at(scores, "negative", "scores.negative");
  if (std::abs(m.scores.positive + m.scores.negative - 1.0) > 1e-6)
    bad_field("scores", "must sum to 1");

  m.model_version = get_uint(field(j, "model_version"), "model_version");

  const json& t = field(j, "tracker");
  if (!t.is_object()) bad_field("tracker", "expected object");
  const json& status = field(t, "status", "tracker.status");
  m.tracker.status = parse_status(get_string(status, "tracker.status"));
  if (const json* b = optional_field(t, "bbox")) {
    if (!b->is_object()) bad_field("tracker.bbox", "expected object");
    m.tracker.bbox = NormBox{number_at(*b, "x", "tracker.bbox.x"),
                             number_at(*b, "y", "tracker.bbox.y"),
                             number_at(*b, "w", "tracker.bbox.w"),
                             number_at(*b, "h", "tracker.bbox.h")};
  }
  if (const json* a = optional_field(j, "accuracy")) m.accuracy = get_double(*a, "accuracy");
  return m;
}

ojson encode_hello(const HelloMessage& m) {
  ojson j;
  j["type"] = "hello";
  j["mode"] = m.mode;
  j["fps"] = m.fps;
  j["window"] = m.window;
  if (m.frames) j["frames"] = *m.frames;
  j["grid_side"] = m.grid_side;
  j["strategy"] = m.strategy;
  return j;
}

HelloMessage decode_hello(const json& j) {
  HelloMessage m;
  m.mode = get_string(field(j, "mode"), "mode");
  m.fps = get_double(field(j, "fps"), "fps");
  m.window = get_int32(field(j, "window"), "window");
  if (const json* f = optional_field(j, "frames")) m.frames = get_int32(*f, "frames");
  m.grid_side = get_int32(field(j, "grid_side"), "grid_side");
  m.strategy = get_string(field(j, "strategy"), "strategy");
  return m;
}

ojson encode_error(const ErrorMessage& m) {
  ojson j;
  j["type"] = "error";
  j["code"] = m.code;
  j["message"] = m.message;
  if (m.seq) j["seq"] = *m.seq;
  return j;
}

ErrorMessage decode_error(const json& j) {
  ErrorMessage m;
  m.code = get_string(field(j, "code"), "code");
  m.message = get_string(field(j, "message"), "message");
  if (const json* s = optional_field(j, "seq")) m.seq = get_int(*s, "seq");
  return m;
}

ojson encode_end(const EndMessage& m) {
  ojson j;
  j["type"] = "end";
  j["frames"] = m.frames;
  j["interactions"] = m.interactions;
  j["model_version"] = m.model_version;
  if (m.accuracy) j["accuracy"] = *m.accuracy;
  return j;
}

EndMessage decode_end(const json& j) {
  EndMessage m;
  m.frames = get_int32(field(j, "frames"), "frames");
  m.interactions = get_int32(field(j, "interactions"), "interactions");
  m.model_version = get_uint(field(j, "model_version"), "model_version");
  if (const json* a = optional_field(j, "accuracy")) m.accuracy = get_double(*a, "accuracy");
  return m;
}

std::string dump(const ojson& j) {
  return j.dump(-1, ' ', false, ojson::error_handler_t::strict);
}

std::string message_type(const json& j) { return get_string(field(j, "type"), "type"); }

}  // namespace

const char* to_string(ControlAction a) {
  switch (a) {
    case ControlAction::kStart: return "start";
    case ControlAction::kPause: return "pause";
    case ControlAction::kReset: return "reset";
    case ControlAction::kStep: return "step";
  }
  return "start";
}

std::string encode(const DownMessage& msg) {
  return dump(std::visit(overloaded{
                             [](const HelloMessage& m) { return encode_hello(m); },
                             [](const FrameMessage& m) { return encode_frame(m); },
                             [](const ErrorMessage& m) { return encode_error(m); },
                             [](const EndMessage& m) { return encode_end(m); },
                         },
                         msg));
}

std::string encode(const UpMessage& msg) {
  ojson j;
  std::visit(overloaded{
                 [&](const TagMessage& m) {
                   j["type"] = "tag";
                   j["seq"] = m.seq;
                   j["label"] = m.label == TagLabel::kPositive ? "positive" : "negative";
                 },
                 [&](const ClickMessage& m) {
                   j["type"] = "click";
                   j["seq"] = m.seq;
                   j["u"] = m.u;
                   j["v"] = m.v;
                 },
                 [&](const ControlMessage& m) {
                   j["type"] = "control";
                   j["action"] = to_string(m.action);
                 },
             },
             msg);
  return dump(j);
}

DownMessage decode_down(std::string_view text) {
  json j = parse_object(text);
  std::string type = message_type(j);
  if (type == "frame") return decode_frame(j);
  if (type == "hello") return decode_hello(j);
  if (type == "error") return decode_error(j);
  if (type == "end") return decode_end(j);
  bad_field("type", "unknown message type '" + type + "'");
}

UpMessage decode_up(std::string_view text) {
  json j = parse_object(text);
  std::string type = message_type(j);
  if (type == "tag") {
    TagMessage m;
    m.seq = get_seq(j);
    std::string label = get_string(field(j, "label"), "label");
    if (label == "positive") m.label = TagLabel::kPositive;
    else if (label == "negative") m.label = TagLabel::kNegative;
    else bad_field("label", "expected 'positive' or 'negative'");
    return m;
  }
  if (type == "click") {
    ClickMessage m;
    m.seq = get_seq(j);
    m.u = get_double(field(j, "u"), "u");
    m.v = get_double(field(j, "v"), "v");
    if (m.u < 0.0 || m.u >= 1.0) bad_field("u", "outside [0,1)");
    if (m.v < 0.0 || m.v >= 1.0) bad_field("v", "outside [0,1)");
    return m;
  }
  if (type == "control")
    return ControlMessage{parse_action(get_string(field(j, "action"), "action"))};
  bad_field("type", "unknown message type '" + type + "'");
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                          int(bytes.size()));
  out.resize(std::size_t(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) fail(ErrorKind::kProtocol, "base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                          int(text.size()));
  if (n < 0) fail(ErrorKind::kProtocol, "invalid base64");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(std::size_t(n) - pad);
  return out;
}

std::vector<std::vector<double>> normalize_cam(const std::vector<double>& cam, int side) {
  require(side > 0 && cam.size() == std::size_t(side) * side, ErrorKind::kUsage,
          "cam size does not match grid side");
  auto [lo, hi] = std::minmax_element(cam.begin(), cam.end());
  const double range = *hi - *lo;
  std::vector<std::vector<double>> rows(side, std::vector<double>(side, 0.0));
  if (!(range > 0.0)) return rows;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      rows[y][x] = std::clamp((cam[std::size_t(y) * side + x] - *lo) / range, 0.0, 1.0);
  return rows;
}

}  // namespace toot::proto
