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

// Latency and quality metrics over emission logs.
//
// Notation: N output tokens with delays d_1..d_N (ideal) or c_1..c_N
// (computation-aware), source duration T, reference length N_ref.
// The AL cutoff tau is the first token emitted with the full source read,
// which is a property of the ideal timeline and is shared by both modes.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simulst/errors.hpp"
#include "simulst/timeline.hpp"

namespace simulst {

// ---------------------------------------------------------------------------
// Closed forms over per-token delays

/// 1-based index of the first delay >= T, or N when none reaches it.
inline std::size_t al_cutoff(std::span<const double> ideal_delays, double source_ms) {
  for (std::size_t j = 0; j < ideal_delays.size(); ++j)
    if (ideal_delays[j] >= source_ms - kTimeEpsilonMs) return j + 1;
  return ideal_delays.size();
}

/// (1/tau) * sum_{j<=tau} (delay_j - (j-1) * T / length).
inline double average_lagging(std::span<const double> delays, std::size_t tau, double source_ms, double length) {
  if (delays.empty() || tau == 0) throw Error(Errc::kEmptyLog, "average lagging of an empty timeline");
  const double step = source_ms / length;
  double sum = 0.0;
  for (std::size_t j = 0; j < tau; ++j) sum += delays[j] - static_cast<double>(j) * step;
  return sum / static_cast<double>(tau);
}

inline double average_proportion(std::span<const double> delays, double source_ms) {
  if (delays.empty()) throw Error(Errc::kEmptyLog, "average proportion of an empty timeline");
  if (!(source_ms > 0.0)) throw Error(Errc::kZeroDuration, "average proportion needs T > 0");
  double sum = 0.0;
  for (double d : delays) sum += d;
  return sum / (static_cast<double>(delays.size()) * source_ms);
}

/// g_1 = d_1, g_j = max(d_j, g_{j-1} + T/N); DAL = mean(g_j - (j-1) T/N).
inline double differentiable_average_lagging(std::span<const double> delays, double source_ms) {
  if (delays.empty()) throw Error(Errc::kEmptyLog, "DAL of an empty timeline");
  const double step = source_ms / static_cast<double>(delays.size());
  double g = 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < delays.size(); ++j) {
    g = j == 0 ? delays[0] : std::max(delays[j], g + step);
    sum += g - static_cast<double>(j) * step;
  }
  return sum / static_cast<double>(delays.size());
}

// ---------------------------------------------------------------------------
// ATD and segmentation

struct AtdConfig {
  double segment_ms = 300.0;
};

/// Maps 1-based target index j to a 1-based source index, given |X| and |Y|.
using AtdPairing = std::function<std::size_t(std::size_t j, std::size_t source_count, std::size_t target_count)>;

inline std::size_t capped_pairing(std::size_t j, std::size_t source_count, std::size_t /*target_count*/) {
  return std::min(j, source_count);
}

/// ceil(T / segment) pseudo-tokens ending at min(i * segment, T).
inline std::vector<double> segment_source(double source_ms, const AtdConfig& cfg = {}) {
  if (!(cfg.segment_ms > 0.0)) throw Error(Errc::kInvalidArgument, "segment_ms must be positive");
  std::vector<double> ends;
  const auto count = SourceStream::uniform_frame_count(source_ms, cfg.segment_ms);
  ends.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) ends.push_back(std::min(static_cast<double>(i) * cfg.segment_ms, source_ms));
  return ends;
}

/// Cuts one speech span [start, end] into segment-sized pieces.
inline std::vector<double> segment_span(double start_ms, double end_ms, const AtdConfig& cfg = {}) {
  if (!(cfg.segment_ms > 0.0)) throw Error(Errc::kInvalidArgument, "segment_ms must be positive");
  std::vector<double> ends;
  const double dur = end_ms - start_ms;
  if (!(dur > 0.0)) return ends;
  const auto count = SourceStream::uniform_frame_count(dur, cfg.segment_ms);
  for (std::size_t i = 1; i <= count; ++i)
    ends.push_back(std::min(start_ms + static_cast<double>(i) * cfg.segment_ms, end_ms));
  return ends;
}

inline double compute_atd(std::span<const double> source_ends, std::span<const double> target_ends,
                          const AtdPairing& pairing = capped_pairing) {
  if (target_ends.empty()) throw Error(Errc::kEmptyTimeline, "ATD needs at least one target token");
  if (source_ends.empty()) throw Error(Errc::kEmptyTimeline, "ATD needs at least one source token");
  double sum = 0.0;
  for (std::size_t j = 1; j <= target_ends.size(); ++j) {
    const std::size_t a = pairing(j, source_ends.size(), target_ends.size());
    if (a < 1 || a > source_ends.size()) throw Error(Errc::kInvalidArgument, "ATD pairing out of range");
    sum += target_ends[j - 1] - source_ends[a - 1];
  }
  return sum / static_cast<double>(target_ends.size());
}

// ---------------------------------------------------------------------------
// Log-level wrappers

namespace detail {

inline void require_scorable(const EmissionLog& log) {
  if (!log.finalized()) throw Error(Errc::kNotFinalized, "log '" + log.id() + "' is not finalized");
  if (log.token_count() == 0) throw Error(Errc::kEmptyLog, "log '" + log.id() + "' has no tokens");
}

}  // namespace detail

inline double compute_al(const EmissionLog& log, DelayMode mode) {
  detail::require_scorable(log);
  const auto delays = log.token_delays(mode);
  const auto tau = al_cutoff(log.token_delays(DelayMode::kIdeal), log.source_duration_ms());
  return average_lagging(delays, tau, log.source_duration_ms(), static_cast<double>(delays.size()));
}

inline double compute_laal(const EmissionLog& log, DelayMode mode) {
  detail::require_scorable(log);
  if (!log.reference_tokens()) throw Error(Errc::kMissingReference, "LAAL needs a reference for '" + log.id() + "'");
  const auto delays = log.token_delays(mode);
  const auto tau = al_cutoff(log.token_delays(DelayMode::kIdeal), log.source_duration_ms());
  const double length = static_cast<double>(std::max(delays.size(), log.reference_tokens()->size()));
  return average_lagging(delays, tau, log.source_duration_ms(), length);
}

inline double compute_ap(const EmissionLog& log, DelayMode mode) {
  detail::require_scorable(log);
  return average_proportion(log.token_delays(mode), log.source_duration_ms());
}

inline double compute_dal(const EmissionLog& log, DelayMode mode) {
  detail::require_scorable(log);
  return differentiable_average_lagging(log.token_delays(mode), log.source_duration_ms());
}

/// Text ATD: the source is segmented, output tokens keep their commit times.
inline double compute_atd(const EmissionLog& log, DelayMode mode, const AtdConfig& cfg = {},
                          const AtdPairing& pairing = capped_pairing) {
  detail::require_scorable(log);
  const auto src = segment_source(log.source_duration_ms(), cfg);
  const auto tgt = log.token_delays(mode);
  return compute_atd(src, tgt, pairing);
}

struct Offsets {
  double start_offset = 0.0;
  double end_offset = 0.0;
};

inline Offsets compute_offsets(const EmissionLog& log, DelayMode mode) {
  detail::require_scorable(log);
  const auto delays = log.token_delays(mode);
  return {delays.front(), delays.back() - log.source_duration_ms()};
}

struct DelayMetricsResult {
  double al = 0.0;
  std::optional<double> laal;  // needs a reference
  double ap = 0.0;
  double dal = 0.0;
  double atd = 0.0;
  double start_offset = 0.0;
  double end_offset = 0.0;
  DelayMode mode = DelayMode::kIdeal;
  std::size_t tau = 0;
  double gamma_step = 0.0;  // T / N
};

inline DelayMetricsResult compute_delay_metrics(const EmissionLog& log, DelayMode mode, const AtdConfig& cfg = {}) {
  detail::require_scorable(log);
  DelayMetricsResult r;
  r.mode = mode;
  r.al = compute_al(log, mode);
  if (log.reference_tokens()) r.laal = compute_laal(log, mode);
  r.ap = log.source_duration_ms() > 0.0 ? compute_ap(log, mode) : 1.0;
  r.dal = compute_dal(log, mode);
  r.atd = compute_atd(log, mode, cfg);
  const auto off = compute_offsets(log, mode);
  r.start_offset = off.start_offset;
  r.end_offset = off.end_offset;
  r.tau = al_cutoff(log.token_delays(DelayMode::kIdeal), log.source_duration_ms());
  r.gamma_step = log.source_duration_ms() / static_cast<double>(log.token_count());
  return r;
}

// ---------------------------------------------------------------------------
// Corpus BLEU

struct BleuOptions {
  std::size_t max_n = 4;
  /// add-k smoothing of every n-gram precision with n > 1; 0 disables.
  double smoothing_k = 0.0;
};

struct BleuResult {
  double score = 0.0;  // 0..100
  std::vector<double> precisions;
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
  std::string diagnostic;  // set when a zero precision forces the score to 0
};

namespace detail {

inline std::map<TokenSeq, std::size_t> ngram_counts(const TokenSeq& seq, std::size_t n) {
  std::map<TokenSeq, std::size_t> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i)
    ++counts[TokenSeq(seq.begin() + static_cast<std::ptrdiff_t>(i), seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace detail

inline BleuResult corpus_bleu_detailed(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references,
                                       const BleuOptions& opt = {}) {
  if (hypotheses.size() != references.size())
    throw Error(Errc::kSizeMismatch, std::to_string(hypotheses.size()) + " hypotheses vs " +
                                         std::to_string(references.size()) + " references");
  if (opt.max_n < 1) throw Error(Errc::kInvalidArgument, "max_n must be >= 1");
  std::vector<double> matches(opt.max_n, 0.0);
  std::vector<double> totals(opt.max_n, 0.0);
  BleuResult r;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    r.hyp_length += hypotheses[s].size();
    r.ref_length += references[s].size();
    for (std::size_t n = 1; n <= opt.max_n; ++n) {
      const auto hc = detail::ngram_counts(hypotheses[s], n);
      const auto rc = detail::ngram_counts(references[s], n);
      for (const auto& [gram, count] : hc) {
        totals[n - 1] += static_cast<double>(count);
        if (auto it = rc.find(gram); it != rc.end())
          matches[n - 1] += static_cast<double>(std::min(count, it->second));
      }
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < opt.max_n; ++n) {
    double m = matches[n];
    double t = totals[n];
    if (n > 0 && opt.smoothing_k > 0.0) {
      m += opt.smoothing_k;
      t += opt.smoothing_k;
    }
    const double p = t > 0.0 ? m / t : 0.0;
    r.precisions.push_back(p);
    if (p <= 0.0) {
      zero = true;
      if (r.diagnostic.empty()) r.diagnostic = std::to_string(n + 1) + "-gram precision is zero";
    } else {
      log_sum += std::log(p);
    }
  }
  if (r.hyp_length == 0) {
    r.brevity_penalty = 0.0;
  } else if (r.hyp_length >= r.ref_length) {
    r.brevity_penalty = 1.0;
  } else {
    r.brevity_penalty = std::exp(1.0 - static_cast<double>(r.ref_length) / static_cast<double>(r.hyp_length));
  }
  r.score = zero ? 0.0 : 100.0 * r.brevity_penalty * std::exp(log_sum / static_cast<double>(opt.max_n));
  return r;
}

inline double corpus_bleu(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references,
                          const BleuOptions& opt = {}) {
  return corpus_bleu_detailed(hypotheses, references, opt).score;
}

}  // namespace simulst
