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

// Core data model: timed sources, hypotheses and the per-session emission
// log that every latency metric consumes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simulst/errors.hpp"

namespace simulst {

using Token = std::string;
using TokenSeq = std::vector<Token>;

/// One row per target token, one column per source frame.
using AttentionMatrix = std::vector<std::vector<double>>;

inline constexpr double kTimeEpsilonMs = 1e-6;

/// Length of the longest common prefix of two sequences.
template <typename Seq>
std::size_t lcp_length(const Seq& a, const Seq& b) {
  const auto [ia, ib] = std::mismatch(a.begin(), a.end(), b.begin(), b.end());
  (void)ib;
  return static_cast<std::size_t>(std::distance(a.begin(), ia));
}

template <typename Seq>
Seq lcp(const Seq& a, const Seq& b) {
  return Seq(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(lcp_length(a, b)));
}

/// Longest prefix shared by every sequence in `seqs`; empty for an empty range.
template <typename Range>
auto lcp_all(const Range& seqs) {
  using Seq = std::decay_t<decltype(*std::begin(seqs))>;
  auto it = std::begin(seqs);
  if (it == std::end(seqs)) return Seq{};
  Seq prefix = *it;
  for (++it; it != std::end(seqs); ++it) prefix.resize(lcp_length(prefix, *it));
  return prefix;
}

template <typename Seq>
bool is_prefix(const Seq& prefix, const Seq& seq) {
  return prefix.size() <= seq.size() && std::equal(prefix.begin(), prefix.end(), seq.begin());
}

struct Frame {
  double duration_ms = 0.0;
  std::string payload_id;
};

/// A timed source. Only timing is modelled; payloads are opaque ids.
class SourceStream {
 public:
  SourceStream(std::vector<Frame> frames, double frame_ms,
               std::optional<TokenSeq> reference = std::nullopt)
      : frames_(std::move(frames)), frame_ms_(frame_ms), reference_(std::move(reference)) {
    if (!(frame_ms_ > 0.0)) throw Error(Errc::kInvalidArgument, "frame_ms must be positive");
    frame_ends_.reserve(frames_.size());
    double t = 0.0;
    for (const auto& f : frames_) {
      if (!(f.duration_ms > 0.0) || !std::isfinite(f.duration_ms))
        throw Error(Errc::kInvalidArgument, "frame durations must be positive and finite");
      t += f.duration_ms;
      frame_ends_.push_back(t);
    }
    total_ms_ = t;
  }

  /// ceil(total_ms / frame_ms) frames; the last one absorbs the remainder.
  static SourceStream uniform(double total_ms, double frame_ms,
                              std::optional<TokenSeq> reference = std::nullopt) {
    if (!(total_ms >= 0.0) || !std::isfinite(total_ms))
      throw Error(Errc::kInvalidArgument, "source duration must be finite and >= 0");
    if (!(frame_ms > 0.0)) throw Error(Errc::kInvalidArgument, "frame_ms must be positive");
    const auto count = uniform_frame_count(total_ms, frame_ms);
    std::vector<Frame> frames;
    frames.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double start = static_cast<double>(i) * frame_ms;
      const double end = std::min(total_ms, start + frame_ms);
      frames.push_back({end - start, "f" + std::to_string(i)});
    }
    SourceStream s(std::move(frames), frame_ms, std::move(reference));
    s.total_ms_ = total_ms;
    return s;
  }

  static std::size_t uniform_frame_count(double total_ms, double frame_ms) {
    // Tolerate float noise such as 3000.0000001 / 100.
    const double raw = total_ms / frame_ms;
    const double rounded = std::round(raw);
    if (std::abs(raw - rounded) < 1e-9) return static_cast<std::size_t>(rounded);
    return static_cast<std::size_t>(std::ceil(raw));
  }

  double total_duration_ms() const { return total_ms_; }
  double frame_ms() const { return frame_ms_; }
  std::size_t frame_count() const { return frames_.size(); }
  const std::vector<Frame>& frames() const { return frames_; }
  const std::optional<TokenSeq>& reference() const { return reference_; }

  /// Number of frames fully received by time `t_ms`.
  std::size_t frames_available(double t_ms) const {
    if (t_ms >= total_ms_ - kTimeEpsilonMs) return frames_.size();
    const auto it = std::upper_bound(frame_ends_.begin(), frame_ends_.end(), t_ms + kTimeEpsilonMs);
    return static_cast<std::size_t>(std::distance(frame_ends_.begin(), it));
  }

 private:
  std::vector<Frame> frames_;
  std::vector<double> frame_ends_;
  double frame_ms_;
  double total_ms_ = 0.0;
  std::optional<TokenSeq> reference_;
};

struct Hypothesis {
  TokenSeq tokens;
  std::optional<AttentionMatrix> attention;

  /// Row count matches token count and every row is a finite probability vector.
  bool well_formed(double tol = 1e-6) const {
    if (!attention) return true;
    if (attention->size() != tokens.size()) return false;
    for (const auto& row : *attention) {
      double sum = 0.0;
      for (double p : row) {
        if (!std::isfinite(p) || p < 0.0) return false;
        sum += p;
      }
      if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
  }
};

struct CommitEvent {
  TokenSeq tokens;
  double ideal_delay_ms = 0.0;  // source consumed at commit
  double wall_delay_ms = 0.0;   // elapsed wall clock at commit, computation included

  bool operator==(const CommitEvent&) const = default;
};

enum class DelayMode { kIdeal, kComputationAware };

/// Append-only record of one session's commits.
class EmissionLog {
 public:
  EmissionLog() = default;
  explicit EmissionLog(std::string id, std::optional<TokenSeq> reference = std::nullopt)
      : id_(std::move(id)), reference_(std::move(reference)) {}

  /// Rebuilds a log from stored fields, re-checking every invariant.
  static EmissionLog restore(std::string id, double source_duration_ms,
                             std::vector<CommitEvent> commits,
                             std::optional<TokenSeq> reference, bool finalized) {
    EmissionLog log(std::move(id), std::move(reference));
    for (auto& c : commits) log.record_commit(std::move(c.tokens), c.ideal_delay_ms, c.wall_delay_ms);
    if (finalized) {
      log.finalize(source_duration_ms);
    } else {
      log.source_ms_ = source_duration_ms;
    }
    return log;
  }

  void record_commit(TokenSeq tokens, double ideal_delay_ms, double wall_delay_ms) {
    if (finalized_) throw Error(Errc::kFinalized, "log '" + id_ + "' is already finalized");
    if (tokens.empty()) throw Error(Errc::kEmptyCommit, "commit carries no tokens");
    if (!std::isfinite(ideal_delay_ms) || !std::isfinite(wall_delay_ms) || ideal_delay_ms < 0.0)
      throw Error(Errc::kInvalidArgument, "delays must be finite and non-negative");
    if (wall_delay_ms < ideal_delay_ms - kTimeEpsilonMs)
      throw Error(Errc::kWallBeforeIdeal, "wall delay precedes ideal delay");
    if (!commits_.empty()) {
      const auto& prev = commits_.back();
      if (ideal_delay_ms < prev.ideal_delay_ms)
        throw Error(Errc::kNonMonotoneDelay, "ideal delay decreased");
      if (wall_delay_ms < prev.wall_delay_ms)
        throw Error(Errc::kNonMonotoneDelay, "wall delay decreased");
    }
    commits_.push_back({std::move(tokens), ideal_delay_ms, std::max(wall_delay_ms, ideal_delay_ms)});
  }

  /// Closes the log at source duration `T`. The final token is pinned to
  /// d = T; if the last commit was emitted earlier, its last token is split
  /// off into a separate commit at T.
  void finalize(double source_duration_ms) {
    if (finalized_) throw Error(Errc::kFinalized, "log '" + id_ + "' is already finalized");
    if (!(source_duration_ms >= 0.0) || !std::isfinite(source_duration_ms))
      throw Error(Errc::kInvalidArgument, "source duration must be finite and >= 0");
    const double T = source_duration_ms;
    for (const auto& c : commits_) {
      if (c.ideal_delay_ms > T + kTimeEpsilonMs)
        throw Error(Errc::kDelayExceedsSource, "commit at " + std::to_string(c.ideal_delay_ms) +
                                                   " ms exceeds source duration " + std::to_string(T));
    }
    for (auto& c : commits_) {
      if (c.ideal_delay_ms > T) c.ideal_delay_ms = T;
    }
    if (!commits_.empty()) {
      auto& last = commits_.back();
      if (std::abs(last.ideal_delay_ms - T) <= kTimeEpsilonMs) {
        last.ideal_delay_ms = T;
        last.wall_delay_ms = std::max(last.wall_delay_ms, T);
      } else if (last.tokens.size() == 1) {
        last.ideal_delay_ms = T;
        last.wall_delay_ms = std::max(last.wall_delay_ms, T);
      } else {
        Token tail = std::move(last.tokens.back());
        last.tokens.pop_back();
        const double wall = std::max(last.wall_delay_ms, T);
        commits_.push_back({TokenSeq{std::move(tail)}, T, wall});
      }
    }
    source_ms_ = T;
    finalized_ = true;
  }

  const std::string& id() const { return id_; }
  double source_duration_ms() const { return source_ms_; }
  const std::vector<CommitEvent>& commits() const { return commits_; }
  const std::optional<TokenSeq>& reference_tokens() const { return reference_; }
  void set_reference_tokens(std::optional<TokenSeq> ref) { reference_ = std::move(ref); }
  bool finalized() const { return finalized_; }

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& c : commits_) n += c.tokens.size();
    return n;
  }

  TokenSeq output_tokens() const {
    TokenSeq out;
    out.reserve(token_count());
    for (const auto& c : commits_) out.insert(out.end(), c.tokens.begin(), c.tokens.end());
    return out;
  }

  /// Per-token delays; every token of a commit inherits the commit's delay.
  std::vector<double> token_delays(DelayMode mode) const {
    std::vector<double> out;
    out.reserve(token_count());
    for (const auto& c : commits_) {
      const double d = mode == DelayMode::kIdeal ? c.ideal_delay_ms : c.wall_delay_ms;
      out.insert(out.end(), c.tokens.size(), d);
    }
    return out;
  }

  bool operator==(const EmissionLog&) const = default;

 private:
  std::string id_;
  double source_ms_ = 0.0;
  std::vector<CommitEvent> commits_;
  std::optional<TokenSeq> reference_;
  bool finalized_ = false;
};

}  // namespace simulst
