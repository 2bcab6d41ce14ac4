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

// Speech-to-speech cascade: committed text is handed to a TTS stage, which
// plays segments on a single output channel. Only timing is simulated.

#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "simulst/agents.hpp"
#include "simulst/errors.hpp"
#include "simulst/metrics.hpp"
#include "simulst/policy_alignatt.hpp"
#include "simulst/timeline.hpp"

namespace simulst {

// ---------------------------------------------------------------------------
// Dual-track estimation

struct DualTrackResult {
  TokenSeq phonemes;
  TokenSeq prosody;
  /// Number of input text tokens available when each symbol was emitted.
  std::vector<std::size_t> emitted_at;
};

/// Incremental phoneme/prosody estimation gated by the AlignAtt rule over
/// the estimator's attention on input text tokens.
class EstimatorSession {
 public:
  EstimatorSession(Agent& agent, std::size_t f) : agent_(agent) {
    cfg_.f = f;
    cfg_.eos.reset();
    cfg_.validate();
  }

  /// Appends text and runs one round. Returns how many input tokens are now
  /// fully covered by emitted symbols.
  std::size_t advance(const TokenSeq& new_text, bool final_round) {
    text_.insert(text_.end(), new_text.begin(), new_text.end());
    AgentRequest req;
    req.kind = RequestKind::kDualDecode;
    req.frames = text_.size();
    req.committed = result_.phonemes;
    req.source = text_;
    auto resp = agent_.handle(req);
    if (!resp.aux) throw Error(Errc::kTrackLengthMismatch, "estimator returned no prosody track");
    if (resp.aux->size() != resp.tokens.size())
      throw Error(Errc::kTrackLengthMismatch, "phoneme and prosody tracks differ in length");
    if (!is_prefix(result_.phonemes, resp.tokens))
      throw Error(Errc::kPrefixConflict, "estimator dropped committed phonemes");
    const std::size_t F = text_.size();
    std::size_t take = resp.tokens.size() - result_.phonemes.size();
    std::size_t covered = F;
    if (!final_round) {
      resp = validate_attention(std::move(resp), F);
      Hypothesis hyp{resp.tokens, resp.attention};
      const auto round = alignatt_round(hyp, F, result_.phonemes, cfg_);
      take = round.emitted.size();
      if (round.stopped && round.stop_token_alignment) covered = *round.stop_token_alignment - 1;
    }
    const std::size_t from = result_.phonemes.size();
    for (std::size_t j = from; j < from + take; ++j) {
      result_.phonemes.push_back(resp.tokens[j]);
      result_.prosody.push_back((*resp.aux)[j]);
      result_.emitted_at.push_back(F);
    }
    covered_ = std::max(covered_, std::min(covered, F));
    return covered_;
  }

  const DualTrackResult& result() const { return result_; }
  std::size_t covered() const { return covered_; }
  const TokenSeq& text() const { return text_; }

 private:
  Agent& agent_;
  AlignAttConfig cfg_;
  TokenSeq text_;
  DualTrackResult result_;
  std::size_t covered_ = 0;
};

/// Feeds `text` one token at a time; the last round releases everything.
inline DualTrackResult estimate_dual_tracks(const TokenSeq& text, Agent& agent, std::size_t f = 1) {
  if (text.empty()) return {};
  EstimatorSession session(agent, f);
  for (std::size_t i = 0; i < text.size(); ++i) session.advance({text[i]}, i + 1 == text.size());
  return session.result();
}

// ---------------------------------------------------------------------------
// Handoff

enum class HandoffKind { kImmediate, kBoundaryGated, kEstimatorGated };

struct HandoffPolicy {
  HandoffKind kind = HandoffKind::kImmediate;
  std::size_t estimator_f = 1;
  /// A token is a boundary if it ends with one of these strings.
  std::vector<std::string> boundary_tokens{".", ",", "?", "!", "。", "、", "？", "！", "#", std::string(kProsodyBoundary)};
  DelayMode clock = DelayMode::kComputationAware;  // commit time used as the request time
};

struct TtsRequest {
  TokenSeq text;
  double requested_at_ms = 0.0;

  bool operator==(const TtsRequest&) const = default;
};

inline bool is_boundary_token(const Token& token, const std::vector<std::string>& boundaries) {
  for (const auto& b : boundaries)
    if (!b.empty() && token.size() >= b.size() && token.compare(token.size() - b.size(), b.size(), b) == 0) return true;
  return false;
}

inline std::vector<TtsRequest> handoff(const EmissionLog& log, const HandoffPolicy& policy, Agent* estimator = nullptr) {
  if (!log.finalized()) throw Error(Errc::kNotFinalized, "handoff needs a finalized log");
  if (policy.kind == HandoffKind::kEstimatorGated && estimator == nullptr)
    throw Error(Errc::kMissingAgent, "estimator-gated handoff needs a dual-track agent");
  std::vector<TtsRequest> out;
  const auto& commits = log.commits();
  auto at = [&](const CommitEvent& c) {
    return policy.clock == DelayMode::kIdeal ? c.ideal_delay_ms : c.wall_delay_ms;
  };

  switch (policy.kind) {
    case HandoffKind::kImmediate:
      for (const auto& c : commits) out.push_back({c.tokens, at(c)});
      break;

    case HandoffKind::kBoundaryGated: {
      TokenSeq buffer;
      for (std::size_t i = 0; i < commits.size(); ++i) {
        buffer.insert(buffer.end(), commits[i].tokens.begin(), commits[i].tokens.end());
        const bool last = i + 1 == commits.size();
        // Flush up to the last boundary token; keep the remainder buffered.
        std::size_t cut = 0;
        for (std::size_t k = buffer.size(); k > 0; --k) {
          if (is_boundary_token(buffer[k - 1], policy.boundary_tokens)) {
            cut = k;
            break;
          }
        }
        if (last) cut = buffer.size();
        if (cut > 0) {
          out.push_back({TokenSeq(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(cut)), at(commits[i])});
          buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(cut));
        }
      }
      break;
    }

    case HandoffKind::kEstimatorGated: {
      EstimatorSession session(*estimator, policy.estimator_f);
      std::size_t flushed = 0;
      for (std::size_t i = 0; i < commits.size(); ++i) {
        const bool last = i + 1 == commits.size();
        const std::size_t covered = session.advance(commits[i].tokens, last);
        if (covered > flushed) {
          const auto& text = session.text();
          out.push_back({TokenSeq(text.begin() + static_cast<std::ptrdiff_t>(flushed),
                                  text.begin() + static_cast<std::ptrdiff_t>(covered)),
                         at(commits[i])});
          flushed = covered;
        }
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output channel

enum class DurationUnit { kWords, kCharBigrams };

/// Speaking-time model: ms_per_unit per whitespace word (Latin scripts) or
/// per character bigram (Ja/Zh). Tokens found in `per_token_ms` use that
/// duration instead.
struct DurationModel {
  double ms_per_unit = 300.0;
  DurationUnit unit = DurationUnit::kWords;
  std::map<Token, double> per_token_ms;

  double duration_ms(const TokenSeq& text) const {
    double ms = 0.0;
    std::size_t words = 0;
    std::size_t chars = 0;
    for (const auto& tok : text) {
      if (auto it = per_token_ms.find(tok); it != per_token_ms.end()) {
        ms += it->second;
        continue;
      }
      if (unit == DurationUnit::kWords) {
        bool in_word = false;
        for (char c : tok) {
          const bool space = c == ' ' || c == '\t';
          if (!space && !in_word) ++words;
          in_word = !space;
        }
      } else {
        for (const auto& cp : utf8_codepoints(tok))
          if (cp != " ") ++chars;
      }
    }
    const std::size_t units = unit == DurationUnit::kWords ? words : (chars + 1) / 2;
    ms += static_cast<double>(units) * ms_per_unit;
    return ms;
  }
};

struct SpeechOutputSegment {
  TokenSeq text;
  double duration_ms = 0.0;
  double requested_at_ms = 0.0;
  double starts_at_ms = 0.0;
  double ends_at_ms = 0.0;

  bool operator==(const SpeechOutputSegment&) const = default;
};

struct ChannelSchedule {
  std::vector<SpeechOutputSegment> segments;

  double total_speech_ms() const {
    double t = 0.0;
    for (const auto& s : segments) t += s.duration_ms;
    return t;
  }
};

/// Plays requests in order on one channel: segment i starts at
/// max(request_i + synthesis latency, end_{i-1}). Zero-length requests are
/// dropped.
inline ChannelSchedule schedule_speech(const std::vector<TtsRequest>& requests, const DurationModel& durations = {},
                                       double synthesis_latency_ms = 0.0) {
  ChannelSchedule sched;
  double channel_free = -std::numeric_limits<double>::infinity();
  double prev_request = -std::numeric_limits<double>::infinity();
  for (const auto& r : requests) {
    if (r.requested_at_ms < prev_request)
      throw Error(Errc::kNonMonotoneRequests, "TTS request times must be non-decreasing");
    prev_request = r.requested_at_ms;
    const double dur = durations.duration_ms(r.text);
    if (!(dur > 0.0)) continue;
    const double start = std::max(r.requested_at_ms + synthesis_latency_ms, channel_free);
    sched.segments.push_back({r.text, dur, r.requested_at_ms, start, start + dur});
    channel_free = start + dur;
  }
  return sched;
}

/// Speech ATD: output segments are cut into AtdConfig::segment_ms pieces.
inline double compute_atd(double source_ms, const ChannelSchedule& sched, const AtdConfig& cfg = {},
                          const AtdPairing& pairing = capped_pairing) {
  std::vector<double> target;
  for (const auto& s : sched.segments) {
    const auto ends = segment_span(s.starts_at_ms, s.ends_at_ms, cfg);
    target.insert(target.end(), ends.begin(), ends.end());
  }
  return compute_atd(segment_source(source_ms, cfg), target, pairing);
}

inline Offsets compute_offsets(const ChannelSchedule& sched, double source_ms) {
  if (sched.segments.empty()) throw Error(Errc::kEmptyLog, "no speech output to measure");
  return {sched.segments.front().starts_at_ms, sched.segments.back().ends_at_ms - source_ms};
}

// ---------------------------------------------------------------------------
// Timing diagrams

struct DiagramSpan {
  std::string label;
  double start_ms = 0.0;
  double end_ms = 0.0;

  bool operator==(const DiagramSpan&) const = default;
};

struct DiagramLane {
  std::string name;
  std::vector<DiagramSpan> spans;

  bool operator==(const DiagramLane&) const = default;
};

/// Three aligned lanes: source, committed text, synthesized speech.
struct TimingDiagram {
  std::string title;
  double source_ms = 0.0;
  std::vector<DiagramLane> lanes;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["title"] = title;
    j["source_ms"] = source_ms;
    j["unit"] = "ms";
    auto& lanes_j = j["lanes"] = nlohmann::ordered_json::array();
    for (const auto& lane : lanes) {
      nlohmann::ordered_json l;
      l["name"] = lane.name;
      l["spans"] = nlohmann::ordered_json::array();
      for (const auto& s : lane.spans)
        l["spans"].push_back({{"label", s.label}, {"start_ms", s.start_ms}, {"end_ms", s.end_ms}});
      lanes_j.push_back(std::move(l));
    }
    return j;
  }

  /// Monospaced render, one row per lane, `width` columns of time axis.
  std::string render_text(std::size_t width = 80) const {
    double horizon = source_ms;
    for (const auto& lane : lanes)
      for (const auto& s : lane.spans) horizon = std::max(horizon, s.end_ms);
    if (width < 10) width = 10;
    const double ms_per_col = horizon > 0.0 ? horizon / static_cast<double>(width) : 1.0;
    std::size_t name_w = 6;
    for (const auto& lane : lanes) name_w = std::max(name_w, lane.name.size());

    std::ostringstream os;
    if (!title.empty()) os << title << '\n';
    os << std::string(name_w, ' ') << " |0 ms" << std::string(width > 16 ? width - 16 : 0, ' ')
       << std::setw(8) << std::fixed << std::setprecision(0) << horizon << " ms|\n";
    for (const auto& lane : lanes) {
      std::string row(width, ' ');
      for (const auto& s : lane.spans) {
        auto col = [&](double t) {
          return std::min(width - 1, static_cast<std::size_t>(std::max(0.0, std::floor(t / ms_per_col))));
        };
        const std::size_t a = col(s.start_ms);
        const std::size_t b = std::max(a, col(s.end_ms));
        row[a] = '[';
        for (std::size_t k = a + 1; k < b; ++k) row[k] = '-';
        if (b > a) row[b] = ']';
        // Label inside the box when it fits (byte-wise; labels are ASCII-safe
        // only when they fit, otherwise they are listed below).
        if (b > a + 1 && s.label.size() <= b - a - 1 && is_ascii(s.label))
          row.replace(a + 1, s.label.size(), s.label);
      }
      os << std::left << std::setw(static_cast<int>(name_w)) << lane.name << std::right << " |" << row << "|\n";
    }
    for (const auto& lane : lanes) {
      for (const auto& s : lane.spans)
        os << "  " << lane.name << " [" << std::fixed << std::setprecision(3) << s.start_ms << ", " << s.end_ms
           << "] " << s.label << '\n';
    }
    return os.str();
  }

 private:
  static bool is_ascii(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
  }
};

inline std::string join_tokens(const TokenSeq& tokens, const std::string& sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += sep;
    out += tokens[i];
  }
  return out;
}

/// Text boxes span from the previous commit (or 0) to the commit time.
inline TimingDiagram render_timing_diagram(const EmissionLog& log, const ChannelSchedule& schedule,
                                           DelayMode clock = DelayMode::kComputationAware, std::string title = {}) {
  TimingDiagram d;
  d.title = std::move(title);
  d.source_ms = log.source_duration_ms();
  DiagramLane source{"source", {}};
  if (!log.commits().empty() || !schedule.segments.empty()) source.spans.push_back({"source", 0.0, d.source_ms});
  DiagramLane text{"text", {}};
  double prev = 0.0;
  for (const auto& c : log.commits()) {
    const double t = clock == DelayMode::kIdeal ? c.ideal_delay_ms : c.wall_delay_ms;
    text.spans.push_back({join_tokens(c.tokens), prev, t});
    prev = t;
  }
  DiagramLane speech{"speech", {}};
  for (const auto& s : schedule.segments) speech.spans.push_back({join_tokens(s.text), s.starts_at_ms, s.ends_at_ms});
  d.lanes = {std::move(source), std::move(text), std::move(speech)};
  return d;
}

}  // namespace simulst
