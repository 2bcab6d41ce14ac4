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

// Manifests, the samples-per-token ratio filter and trade-off CSV reports.
//
// Manifest format: one entry per line, six tab-separated columns
//
//   id  duration_ms  sample_count  sample_rate  reference  agent_binding
//
// `reference` is space-separated tokens. Inside a column, backslash escapes
// \t, \n, \r and \\ stand for tab, newline, carriage return and backslash.
// Blank lines and lines starting with '#' are ignored; `agent_binding` may
// be empty.

#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "simulst/errors.hpp"
#include "simulst/timeline.hpp"

namespace simulst {

// ---------------------------------------------------------------------------
// Number formatting shared by every text artifact

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error(Errc::kInvalidArgument, "cannot format number");
  return std::string(buf, end);
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto at = s.find(sep, pos);
    out.emplace_back(s.substr(pos, at == std::string_view::npos ? std::string_view::npos : at - pos));
    if (at == std::string_view::npos) break;
    pos = at + 1;
  }
  return out;
}

inline TokenSeq split_tokens(std::string_view s) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
  std::string id;
  double source_duration_ms = 0.0;
  long long source_sample_count = 0;
  long long sample_rate = 16000;
  TokenSeq reference;
  std::string agent_binding;

  bool operator==(const ManifestEntry&) const = default;
};

inline std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::optional<std::string> unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) return std::nullopt;
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: return std::nullopt;
    }
  }
  return out;
}

inline void validate_entry(const ManifestEntry& e, const std::string& where) {
  auto fail = [&](const std::string& msg) { throw Error(Errc::kParseError, where + ": " + msg); };
  if (e.id.empty()) fail("empty id");
  if (!(e.source_duration_ms >= 0.0) || !std::isfinite(e.source_duration_ms)) fail("duration must be >= 0");
  if (e.source_sample_count < 0) fail("sample count must be >= 0");
  if (e.sample_rate <= 0) fail("sample rate must be positive");
  const double expected = e.source_duration_ms * static_cast<double>(e.sample_rate) / 1000.0;
  if (std::abs(expected - static_cast<double>(e.source_sample_count)) > 1.0 + 1e-9)
    fail("sample count " + std::to_string(e.source_sample_count) + " disagrees with duration (" +
         std::to_string(expected) + " samples expected)");
}

inline std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::string& name = "<manifest>") {
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = name + ":" + std::to_string(lineno);
    auto cols = split(line, '\t');
    if (cols.size() == 5) cols.emplace_back();
    if (cols.size() != 6) throw Error(Errc::kParseError, where + ": expected 6 tab-separated columns, got " + std::to_string(cols.size()));
    for (auto& c : cols) {
      auto u = unescape_field(c);
      if (!u) throw Error(Errc::kParseError, where + ": bad escape sequence");
      c = std::move(*u);
    }
    ManifestEntry e;
    e.id = cols[0];
    const auto dur = parse_double(cols[1]);
    if (!dur) throw Error(Errc::kParseError, where + ": missing or invalid duration_ms '" + cols[1] + "'");
    e.source_duration_ms = *dur;
    const auto samples = parse_int(cols[2]);
    if (!samples) throw Error(Errc::kParseError, where + ": invalid sample_count '" + cols[2] + "'");
    e.source_sample_count = *samples;
    const auto rate = parse_int(cols[3]);
    if (!rate) throw Error(Errc::kParseError, where + ": invalid sample_rate '" + cols[3] + "'");
    e.sample_rate = *rate;
    e.reference = split_tokens(cols[4]);
    e.agent_binding = cols[5];
    validate_entry(e, where);
    if (!seen.insert(e.id).second) throw Error(Errc::kDuplicateId, where + ": duplicate id '" + e.id + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open manifest " + path);
  return parse_manifest(in, path);
}

inline void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  for (const auto& e : entries) {
    std::string ref;
    for (std::size_t i = 0; i < e.reference.size(); ++i) {
      if (i > 0) ref += ' ';
      ref += e.reference[i];
    }
    out << escape_field(e.id) << '\t' << format_double(e.source_duration_ms) << '\t' << e.source_sample_count << '\t'
        << e.sample_rate << '\t' << escape_field(ref) << '\t' << escape_field(e.agent_binding) << '\n';
  }
}

inline void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIoError, "cannot write manifest " + path);
  write_manifest(out, entries);
  if (!out) throw Error(Errc::kIoError, "write failed for " + path);
}

// ---------------------------------------------------------------------------
// Ratio filter

struct FilterConfig {
  double max_ratio = 4000.0;  // input samples per output token
};

inline double samples_per_token(const ManifestEntry& e) {
  if (e.reference.empty()) throw Error(Errc::kZeroTokens, "entry '" + e.id + "' has no output tokens");
  return static_cast<double>(e.source_sample_count) / static_cast<double>(e.reference.size());
}

/// Keep iff samples / tokens <= max_ratio; only entries exceeding it are dropped.
inline bool ratio_filter(const ManifestEntry& e, const FilterConfig& cfg = {}) {
  if (!(cfg.max_ratio > 0.0)) throw Error(Errc::kInvalidArgument, "max_ratio must be positive");
  return samples_per_token(e) <= cfg.max_ratio;
}

// ---------------------------------------------------------------------------
// Trade-off reports

/// One configuration's corpus-level quality and latency. Empty optionals
/// are written as empty CSV cells.
struct TradeoffRow {
  std::string policy;
  double chunk_ms = 0.0;
  double param = 0.0;  // n for LA, f for AlignAtt
  std::optional<double> bleu;
  std::optional<double> al, laal, ap, dal, atd;
  std::optional<double> al_ca, laal_ca, ap_ca, dal_ca, atd_ca;
  std::optional<double> start_offset, end_offset;

  bool operator==(const TradeoffRow&) const = default;
};

inline constexpr std::string_view kTradeoffHeader =
    "policy,chunk_ms,param,bleu,AL,LAAL,AP,DAL,ATD,AL_CA,LAAL_CA,AP_CA,DAL_CA,ATD_CA,Start_Offset,End_Offset";

inline std::string format_tradeoff_row(const TradeoffRow& r) {
  if (r.policy.find_first_of(",\"\n") != std::string::npos)
    throw Error(Errc::kInvalidArgument, "policy name must not contain CSV metacharacters");
  std::string out = r.policy + ',' + format_double(r.chunk_ms) + ',' + format_double(r.param);
  for (const auto* v : {&r.bleu, &r.al, &r.laal, &r.ap, &r.dal, &r.atd, &r.al_ca, &r.laal_ca, &r.ap_ca, &r.dal_ca,
                        &r.atd_ca, &r.start_offset, &r.end_offset}) {
    out += ',';
    if (*v) out += format_double(**v);
  }
  return out;
}

inline TradeoffRow parse_tradeoff_row(std::string_view line, const std::string& where = "<csv>") {
  const auto cols = split(line, ',');
  if (cols.size() != 16) throw Error(Errc::kParseError, where + ": expected 16 columns, got " + std::to_string(cols.size()));
  TradeoffRow r;
  r.policy = cols[0];
  auto req = [&](const std::string& s) {
    auto v = parse_double(s);
    if (!v) throw Error(Errc::kParseError, where + ": invalid number '" + s + "'");
    return *v;
  };
  auto opt = [&](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    return req(s);
  };
  r.chunk_ms = req(cols[1]);
  r.param = req(cols[2]);
  std::optional<double>* fields[] = {&r.bleu, &r.al, &r.laal, &r.ap, &r.dal, &r.atd, &r.al_ca,
                                     &r.laal_ca, &r.ap_ca, &r.dal_ca, &r.atd_ca, &r.start_offset, &r.end_offset};
  for (std::size_t i = 0; i < 13; ++i) *fields[i] = opt(cols[i + 3]);
  return r;
}

/// `comment` lines (e.g. "seed=0") are written first, each prefixed by "# ".
inline void write_tradeoff(std::ostream& out, const std::vector<TradeoffRow>& rows,
                           const std::vector<std::string>& comment = {}) {
  for (const auto& c : comment) out << "# " << c << '\n';
  out << kTradeoffHeader << '\n';
  for (const auto& r : rows) out << format_tradeoff_row(r) << '\n';
}

inline void export_tradeoff(const std::vector<TradeoffRow>& rows, const std::string& path,
                            const std::vector<std::string>& comment = {}) {
  if (rows.empty()) throw Error(Errc::kInvalidArgument, "no trade-off rows to export");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path);
  write_tradeoff(out, rows, comment);
  if (!out) throw Error(Errc::kIoError, "write failed for " + path);
}

struct TradeoffTable {
  std::vector<std::string> comment;
  std::vector<TradeoffRow> rows;
};

inline TradeoffTable parse_tradeoff(std::istream& in, const std::string& name = "<csv>") {
  TradeoffTable t;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header && line.rfind("# ", 0) == 0) {
      t.comment.push_back(line.substr(2));
      continue;
    }
    if (!header) {
      if (line != kTradeoffHeader) throw Error(Errc::kParseError, name + ":" + std::to_string(lineno) + ": unexpected header");
      header = true;
      continue;
    }
    if (line.empty()) continue;
    t.rows.push_back(parse_tradeoff_row(line, name + ":" + std::to_string(lineno)));
  }
  if (!header) throw Error(Errc::kParseError, name + ": missing CSV header");
  return t;
}

inline TradeoffTable import_tradeoff(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path);
  return parse_tradeoff(in, path);
}

}  // namespace simulst
