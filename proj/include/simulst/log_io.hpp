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

// Emission log record files (JSON Lines). Line 1 is a run header, every
// following line is one finalized session:
//
//   {"simulst_log":1,"policy":"la","chunk_ms":950.0,"param":2.0,"seed":0,
//    "clock":"computation_aware","cost":"fixed:50"}
//   {"id":"s1","source_duration_ms":3000.0,
//    "commits":[{"tokens":["a"],"d":1000.0,"c":1050.0}],
//    "reference_tokens":["a"]}
//
// Keys appear in exactly this order; "reference_tokens" is omitted when the
// session has no reference. Numbers use the shortest round-trip form.

#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "simulst/errors.hpp"
#include "simulst/timeline.hpp"

namespace simulst {

struct LogHeader {
  std::string policy;
  double chunk_ms = 0.0;
  double param = 0.0;
  std::uint64_t seed = 0;
  std::string clock = "ideal";
  std::string cost = "none";

  bool operator==(const LogHeader&) const = default;
};

struct LogFile {
  LogHeader header;
  std::vector<EmissionLog> sessions;
};

inline constexpr int kLogFormatVersion = 1;

inline std::string encode_header(const LogHeader& h) {
  nlohmann::ordered_json j;
  j["simulst_log"] = kLogFormatVersion;
  j["policy"] = h.policy;
  j["chunk_ms"] = h.chunk_ms;
  j["param"] = h.param;
  j["seed"] = h.seed;
  j["clock"] = h.clock;
  j["cost"] = h.cost;
  return j.dump();
}

inline std::string encode_session(const EmissionLog& log) {
  if (!log.finalized()) throw Error(Errc::kNotFinalized, "only finalized logs are serialized");
  nlohmann::ordered_json j;
  j["id"] = log.id();
  j["source_duration_ms"] = log.source_duration_ms();
  auto& commits = j["commits"] = nlohmann::ordered_json::array();
  for (const auto& c : log.commits()) {
    nlohmann::ordered_json cj;
    cj["tokens"] = c.tokens;
    cj["d"] = c.ideal_delay_ms;
    cj["c"] = c.wall_delay_ms;
    commits.push_back(std::move(cj));
  }
  if (log.reference_tokens()) j["reference_tokens"] = *log.reference_tokens();
  return j.dump();
}

inline EmissionLog decode_session(const std::string& line, const std::string& where = "<log>") {
  try {
    const auto j = nlohmann::json::parse(line);
    std::vector<CommitEvent> commits;
    for (const auto& cj : j.at("commits"))
      commits.push_back({cj.at("tokens").get<TokenSeq>(), cj.at("d").get<double>(), cj.at("c").get<double>()});
    std::optional<TokenSeq> ref;
    if (auto it = j.find("reference_tokens"); it != j.end() && !it->is_null()) ref = it->get<TokenSeq>();
    return EmissionLog::restore(j.at("id").get<std::string>(), j.at("source_duration_ms").get<double>(),
                                std::move(commits), std::move(ref), true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kParseError, where + ": " + e.what());
  } catch (const Error& e) {
    throw Error(Errc::kParseError, where + ": " + e.what());
  }
}

inline LogHeader decode_header(const std::string& line, const std::string& where = "<log>") {
  try {
    const auto j = nlohmann::json::parse(line);
    if (!j.contains("simulst_log")) throw Error(Errc::kParseError, where + ": missing run header");
    if (j["simulst_log"] != kLogFormatVersion) throw Error(Errc::kParseError, where + ": unsupported log version");
    LogHeader h;
    h.policy = j.at("policy").get<std::string>();
    h.chunk_ms = j.at("chunk_ms").get<double>();
    h.param = j.at("param").get<double>();
    h.seed = j.at("seed").get<std::uint64_t>();
    h.clock = j.at("clock").get<std::string>();
    h.cost = j.at("cost").get<std::string>();
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kParseError, where + ": " + e.what());
  }
}

inline void write_log_file(std::ostream& out, const LogFile& file) {
  out << encode_header(file.header) << '\n';
  for (const auto& s : file.sessions) out << encode_session(s) << '\n';
}

inline LogFile read_log_file(std::istream& in, const std::string& name = "<log>") {
  LogFile file;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    if (!have_header) {
      file.header = decode_header(line, where);
      have_header = true;
    } else {
      file.sessions.push_back(decode_session(line, where));
    }
  }
  if (!have_header) throw Error(Errc::kParseError, name + ": empty log file");
  return file;
}

inline void save_log_file(const std::string& path, const LogFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path);
  write_log_file(out, file);
  if (!out) throw Error(Errc::kIoError, "write failed for " + path);
}

inline LogFile load_log_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path);
  return read_log_file(in, path);
}

}  // namespace simulst
