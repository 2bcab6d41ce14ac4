// Copyright 2026 The simulst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Line-delimited JSON wire format between the harness and agent processes.
//
//   handshake (agent -> harness, first line): {"proto":1}
//   request:  {"kind":"decode","frames":F,"committed":[...],"beam":B}
//             dual_decode additionally carries "source":[...]
//   response: {"tokens":[...],"attention":[[...]],"aux":[...],"compute_ms":x}
//             attention/aux/compute_ms are optional; {"error":"..."} reports
//             an agent-side failure.

#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "simulst/agents.hpp"
#include "simulst/errors.hpp"

namespace simulst::protocol {

inline constexpr int kVersion = 1;

/// How multi-head attention tensors (heads x tokens x frames) are reduced.
enum class HeadAggregation { kGiven, kMeanOverHeads };

inline std::string_view kind_name(RequestKind kind) {
  switch (kind) {
    case RequestKind::kDecode: return "decode";
    case RequestKind::kDualDecode: return "dual_decode";
    case RequestKind::kReset: return "reset";
    case RequestKind::kClose: return "close";
  }
  return "decode";
}

inline RequestKind parse_kind(std::string_view s) {
  if (s == "decode") return RequestKind::kDecode;
  if (s == "dual_decode") return RequestKind::kDualDecode;
  if (s == "reset") return RequestKind::kReset;
  if (s == "close") return RequestKind::kClose;
  throw Error(Errc::kProtocolError, "unknown request kind '" + std::string(s) + "'");
}

inline std::string handshake_line() { return R"({"proto":1})"; }

inline void check_handshake(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kProtocolError, std::string("malformed handshake: ") + e.what());
  }
  if (!j.is_object() || !j.contains("proto") || j["proto"] != kVersion)
    throw Error(Errc::kProtocolError, "expected handshake {\"proto\":1}, got " + std::string(line));
}

inline std::string encode_request(const AgentRequest& req) {
  nlohmann::ordered_json j;
  j["kind"] = kind_name(req.kind);
  j["frames"] = req.frames;
  j["committed"] = req.committed;
  j["beam"] = req.beam;
  if (req.kind == RequestKind::kDualDecode) j["source"] = req.source;
  return j.dump();
}

inline AgentRequest decode_request(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    if (!j.is_object()) throw Error(Errc::kProtocolError, "request is not an object");
    AgentRequest req;
    req.kind = parse_kind(j.at("kind").get<std::string>());
    req.frames = j.value("frames", std::size_t{0});
    req.committed = j.value("committed", TokenSeq{});
    req.beam = j.value("beam", 1);
    req.source = j.value("source", TokenSeq{});
    if (req.beam < 1) throw Error(Errc::kProtocolError, "beam must be >= 1");
    return req;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kProtocolError, std::string("malformed request: ") + e.what());
  }
}

inline std::string encode_response(const AgentResponse& resp) {
  nlohmann::ordered_json j;
  j["tokens"] = resp.tokens;
  if (resp.attention) j["attention"] = *resp.attention;
  if (resp.aux) j["aux"] = *resp.aux;
  if (resp.compute_ms) j["compute_ms"] = *resp.compute_ms;
  return j.dump();
}

inline std::string encode_error(std::string_view message) {
  nlohmann::ordered_json j;
  j["error"] = message;
  return j.dump();
}

namespace detail {

inline AttentionMatrix to_matrix(const nlohmann::json& j) {
  AttentionMatrix m;
  for (const auto& row : j) {
    if (!row.is_array()) throw Error(Errc::kBadAttentionShape, "attention rows must be arrays");
    std::vector<double> r;
    r.reserve(row.size());
    for (const auto& v : row) {
      if (!v.is_number()) throw Error(Errc::kProtocolError, "attention entries must be numbers");
      r.push_back(v.get<double>());
    }
    m.push_back(std::move(r));
  }
  return m;
}

}  // namespace detail

/// Parses one response line. Validates structure only; attention shape is
/// checked against the frame count by validate_attention().
inline AgentResponse decode_response(std::string_view line,
                                     HeadAggregation aggregation = HeadAggregation::kGiven) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kProtocolError, std::string("malformed response: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::kProtocolError, "response is not an object");
  if (j.contains("error")) throw Error(Errc::kProtocolError, "agent error: " + j["error"].dump());
  try {
    AgentResponse resp;
    const auto& tokens = j.at("tokens");
    if (!tokens.is_array()) throw Error(Errc::kProtocolError, "tokens must be an array");
    for (const auto& t : tokens) {
      if (!t.is_string()) throw Error(Errc::kProtocolError, "tokens must be strings");
      resp.tokens.push_back(t.get<std::string>());
    }
    if (auto it = j.find("attention"); it != j.end() && !it->is_null()) {
      if (!it->is_array()) throw Error(Errc::kProtocolError, "attention must be an array");
      const bool three_d = !it->empty() && it->front().is_array() && !it->front().empty() &&
                           it->front().front().is_array();
      if (three_d) {
        if (aggregation != HeadAggregation::kMeanOverHeads)
          throw Error(Errc::kBadAttentionShape, "multi-head attention received but aggregation is 'given'");
        std::vector<AttentionMatrix> heads;
        for (const auto& h : *it) heads.push_back(detail::to_matrix(h));
        resp.attention = mean_over_heads(heads);
      } else {
        resp.attention = detail::to_matrix(*it);
      }
    }
    if (auto it = j.find("aux"); it != j.end() && !it->is_null()) resp.aux = it->get<TokenSeq>();
    if (auto it = j.find("compute_ms"); it != j.end() && !it->is_null()) {
      const double ms = it->get<double>();
      if (!(ms >= 0.0) || !std::isfinite(ms)) throw Error(Errc::kProtocolError, "compute_ms must be >= 0");
      resp.compute_ms = ms;
    }
    if (resp.aux && resp.aux->size() != resp.tokens.size())
      throw Error(Errc::kTrackLengthMismatch, "aux track length differs from tokens");
    return resp;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kProtocolError, std::string("malformed response: ") + e.what());
  }
}

}  // namespace simulst::protocol
