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

// Incremental model abstraction. Policies talk to an Agent; the agent is
// either in-process (the toy transducer, the toy romanizer) or an external
// process speaking the line protocol (see external_agent.hpp).

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simulst/errors.hpp"
#include "simulst/timeline.hpp"

namespace simulst {

enum class RequestKind { kDecode, kDualDecode, kReset, kClose };

struct AgentRequest {
  RequestKind kind = RequestKind::kDecode;
  std::size_t frames = 0;
  TokenSeq committed;
  int beam = 1;
  // dual_decode only: the text received so far; `frames` counts its tokens.
  TokenSeq source;
};

struct AgentResponse {
  TokenSeq tokens;
  std::optional<AttentionMatrix> attention;
  std::optional<TokenSeq> aux;
  std::optional<double> compute_ms;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentResponse handle(const AgentRequest& request) = 0;
};

/// 1-based frame index of the row maximum. Ties go to the lowest frame.
inline std::size_t argmax_frame(std::span<const double> row) {
  if (row.empty()) throw Error(Errc::kBadAttentionShape, "empty attention row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best + 1;
}

inline AttentionMatrix mean_over_heads(const std::vector<AttentionMatrix>& heads) {
  if (heads.empty()) throw Error(Errc::kBadAttentionShape, "no attention heads");
  AttentionMatrix out = heads.front();
  for (std::size_t h = 1; h < heads.size(); ++h) {
    if (heads[h].size() != out.size()) throw Error(Errc::kBadAttentionShape, "head row counts differ");
    for (std::size_t r = 0; r < out.size(); ++r) {
      if (heads[h][r].size() != out[r].size())
        throw Error(Errc::kBadAttentionShape, "head column counts differ");
      for (std::size_t c = 0; c < out[r].size(); ++c) out[r][c] += heads[h][r][c];
    }
  }
  const double scale = 1.0 / static_cast<double>(heads.size());
  for (auto& row : out)
    for (auto& p : row) p *= scale;
  return out;
}

/// Checks a (|tokens| x F) attention matrix. Rows whose sum is within 1e-3
/// of one (inclusive) are renormalized; anything worse is rejected.
inline AgentResponse validate_attention(AgentResponse resp, std::size_t frames) {
  if (!resp.attention) throw Error(Errc::kMissingAttention, "response carries no attention");
  auto& att = *resp.attention;
  if (att.size() != resp.tokens.size())
    throw Error(Errc::kBadAttentionShape, "attention has " + std::to_string(att.size()) +
                                              " rows for " + std::to_string(resp.tokens.size()) + " tokens");
  for (std::size_t r = 0; r < att.size(); ++r) {
    auto& row = att[r];
    if (row.size() != frames)
      throw Error(Errc::kBadAttentionShape, "attention row " + std::to_string(r) + " has " +
                                                std::to_string(row.size()) + " columns, expected " +
                                                std::to_string(frames));
    double sum = 0.0;
    for (double p : row) {
      if (!std::isfinite(p) || p < 0.0)
        throw Error(Errc::kNonStochasticRow, "row " + std::to_string(r) + " has a negative or non-finite entry");
      sum += p;
    }
    const double dev = std::abs(sum - 1.0);
    if (dev > 1e-3 + 1e-12)
      throw Error(Errc::kNonStochasticRow, "row " + std::to_string(r) + " sums to " + std::to_string(sum));
    if (dev > 1e-12)
      for (double& p : row) p /= sum;
  }
  return resp;
}

// ---------------------------------------------------------------------------
// Toy aligned transducer

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Source span [start, end] in 1-based frames that a target token needs.
struct AlignedToken {
  std::size_t span_start = 1;
  std::size_t span_end = 1;
  Token token;

  bool operator==(const AlignedToken&) const = default;
};

struct ToyTransducerSpec {
  std::vector<AlignedToken> entries;
  std::size_t total_frames = 0;
  std::size_t instability = 0;  // k: trailing tokens within k frames of the boundary are perturbed
  std::uint64_t seed = 0;

  void validate() const {
    std::size_t prev_start = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (e.span_start < 1 || e.span_start > e.span_end || e.span_end > total_frames)
        throw Error(Errc::kInvalidArgument, "toy span " + std::to_string(i) + " lies outside the source");
      if (e.span_start < prev_start)
        throw Error(Errc::kInvalidArgument, "toy spans must be monotone in start frame");
      if (e.token.empty()) throw Error(Errc::kInvalidArgument, "toy tokens must be non-empty");
      prev_start = e.span_start;
    }
  }

  TokenSeq offline() const {
    TokenSeq out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.token);
    return out;
  }

  bool operator==(const ToyTransducerSpec&) const = default;
};

inline constexpr std::uint64_t kDecoyVariants = 2;

/// The perturbed stand-in for `token` at output position `index` when
/// decoding with `frames` frames. Two variants exist, so successive unstable
/// hypotheses agree on a wrong token only some of the time.
inline Token decoy_token(const Token& token, std::uint64_t seed, std::size_t index, std::size_t frames) {
  const auto h = detail::splitmix64(seed ^ detail::splitmix64(index * 0x1000193ULL + frames * 0x9e37ULL + 1));
  return token + "~" + std::to_string(h % kDecoyVariants);
}

inline bool is_decoy_of(const Token& candidate, const Token& token) {
  if (candidate.size() != token.size() + 2 || candidate.compare(0, token.size(), token) != 0) return false;
  if (candidate[token.size()] != '~') return false;
  const char v = candidate.back();
  return v >= '0' && v < static_cast<char>('0' + kDecoyVariants);
}

/// Deterministic decode of the toy transducer with `frames` frames received
/// and `committed` forced as the output prefix.
inline Hypothesis toy_decode(const ToyTransducerSpec& spec, std::size_t frames, const TokenSeq& committed) {
  const std::size_t F = std::min(frames, spec.total_frames);
  const auto& entries = spec.entries;
  for (std::size_t j = 0; j < committed.size(); ++j) {
    if (j >= entries.size() || (committed[j] != entries[j].token && !is_decoy_of(committed[j], entries[j].token)))
      throw Error(Errc::kPrefixConflict, "committed token " + std::to_string(j) + " '" + committed[j] +
                                             "' is not producible by the toy transducer");
  }
  std::size_t available = 0;
  while (available < entries.size() && entries[available].span_end <= F) ++available;

  Hypothesis hyp;
  const std::size_t count = std::max(available, committed.size());
  hyp.tokens.reserve(count);
  const bool full = F >= spec.total_frames;
  const std::size_t unstable_from = available - std::min(spec.instability, available);
  for (std::size_t j = 0; j < count; ++j) {
    if (j < committed.size()) {
      hyp.tokens.push_back(committed[j]);
      continue;
    }
    const auto& e = entries[j];
    const bool near_boundary = F - e.span_end <= spec.instability;
    if (!full && spec.instability > 0 && j >= unstable_from && near_boundary) {
      hyp.tokens.push_back(decoy_token(e.token, spec.seed, j, F));
    } else {
      hyp.tokens.push_back(e.token);
    }
  }
  if (F > 0) {
    AttentionMatrix att(count, std::vector<double>(F, 0.0));
    for (std::size_t j = 0; j < count; ++j) att[j][std::min(entries[j].span_end, F) - 1] = 1.0;
    hyp.attention = std::move(att);
  } else if (count == 0) {
    hyp.attention = AttentionMatrix{};
  }
  return hyp;
}

/// Monotone spans for `reference` over `total_frames` frames, with seeded
/// jitter around an even spread.
inline ToyTransducerSpec synthesize_toy_spec(const TokenSeq& reference, std::size_t total_frames,
                                             std::size_t instability, std::uint64_t seed) {
  ToyTransducerSpec spec;
  spec.total_frames = total_frames;
  spec.instability = instability;
  spec.seed = seed;
  if (reference.empty()) return spec;
  if (total_frames == 0) throw Error(Errc::kInvalidArgument, "cannot align tokens to an empty source");
  const double step = static_cast<double>(total_frames) / static_cast<double>(reference.size());
  std::size_t prev_end = 0;
  for (std::size_t j = 0; j < reference.size(); ++j) {
    const auto r = detail::splitmix64(seed ^ detail::splitmix64(j + 0x51ed));
    const double jitter = (static_cast<double>(r % 1001) / 1000.0 - 0.5) * step;
    double centre = step * static_cast<double>(j + 1) + jitter;
    auto end = static_cast<std::size_t>(std::llround(std::clamp(centre, 1.0, static_cast<double>(total_frames))));
    end = std::clamp(end, std::max<std::size_t>(prev_end, 1), total_frames);
    const std::size_t start = std::min(prev_end + 1, end);
    spec.entries.push_back({start, end, reference[j]});
    prev_end = end;
  }
  return spec;
}

class ToyTransducerAgent final : public Agent {
 public:
  explicit ToyTransducerAgent(ToyTransducerSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  AgentResponse handle(const AgentRequest& request) override {
    switch (request.kind) {
      case RequestKind::kDecode: {
        auto hyp = toy_decode(spec_, request.frames, request.committed);
        return {std::move(hyp.tokens), std::move(hyp.attention), std::nullopt, std::nullopt};
      }
      case RequestKind::kReset:
      case RequestKind::kClose:
        return {};
      case RequestKind::kDualDecode:
        break;
    }
    throw Error(Errc::kProtocolError, "toy transducer does not support dual_decode");
  }

  const ToyTransducerSpec& spec() const { return spec_; }

 private:
  ToyTransducerSpec spec_;
};

// ---------------------------------------------------------------------------
// Toy dual-track (phoneme + prosody) estimator

inline constexpr std::string_view kProsodyRise = "rise";
inline constexpr std::string_view kProsodyFall = "fall";
inline constexpr std::string_view kProsodyBoundary = "boundary";
inline constexpr std::string_view kBlank = "<blank>";

inline bool is_prosody_symbol(std::string_view s) {
  return s == kProsodyRise || s == kProsodyFall || s == kProsodyBoundary || s == kBlank;
}

/// Splits UTF-8 text into code points (invalid bytes pass through singly).
inline std::vector<std::string> utf8_codepoints(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    len = std::min(len, text.size() - i);
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

struct RomanizerEntry {
  TokenSeq phonemes;
  TokenSeq prosody;  // same length as phonemes
};

/// grapheme -> (phonemes, prosody) lookup.
class RomanizerTable {
 public:
  RomanizerTable() = default;

  void add(std::string grapheme, RomanizerEntry entry) {
    if (entry.phonemes.size() != entry.prosody.size())
      throw Error(Errc::kTrackLengthMismatch, "romanizer entry '" + grapheme + "' has unequal tracks");
    for (const auto& p : entry.prosody)
      if (!is_prosody_symbol(p)) throw Error(Errc::kInvalidArgument, "unknown prosody symbol '" + p + "'");
    table_[std::move(grapheme)] = std::move(entry);
  }

  /// Unknown graphemes become a single phoneme equal to themselves.
  RomanizerEntry lookup(const std::string& grapheme) const {
    if (auto it = table_.find(grapheme); it != table_.end()) return it->second;
    return {{grapheme}, {Token(kBlank)}};
  }

  std::size_t size() const { return table_.size(); }

  /// Tab-separated `grapheme  phonemes  prosody`, tracks space-separated.
  /// Blank lines and lines starting with '#' are skipped.
  static RomanizerTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::kIoError, "cannot open romanizer table " + path);
    RomanizerTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> cols;
      std::size_t pos = 0;
      while (true) {
        auto tab = line.find('\t', pos);
        cols.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
        if (tab == std::string::npos) break;
        pos = tab + 1;
      }
      if (cols.size() != 3)
        throw Error(Errc::kParseError, path + ":" + std::to_string(lineno) + ": expected 3 columns");
      t.add(cols[0], {split_words(cols[1]), split_words(cols[2])});
    }
    return t;
  }

  /// Kana needed by the bundled examples plus Japanese punctuation.
  static RomanizerTable builtin() {
    RomanizerTable t;
    const std::string b(kBlank);
    auto two = [&](const char* g, const char* c, const char* v) { t.add(g, {{c, v}, {b, b}}); };
    auto one = [&](const char* g, const char* p) { t.add(g, {{p}, {b}}); };
    two("か", "k", "a"); two("き", "k", "i"); two("く", "k", "u"); two("け", "k", "e"); two("こ", "k", "o");
    two("さ", "s", "a"); two("し", "sh", "i"); two("す", "s", "u"); two("せ", "s", "e"); two("そ", "s", "o");
    two("た", "t", "a"); two("ち", "ch", "i"); two("つ", "ts", "u"); two("て", "t", "e"); two("と", "t", "o");
    two("な", "n", "a"); two("に", "n", "i"); two("ぬ", "n", "u"); two("ね", "n", "e"); two("の", "n", "o");
    two("は", "w", "a"); two("ひ", "h", "i"); two("ふ", "f", "u"); two("へ", "h", "e"); two("ほ", "h", "o");
    two("ま", "m", "a"); two("み", "m", "i"); two("む", "m", "u"); two("め", "m", "e"); two("も", "m", "o");
    two("ら", "r", "a"); two("り", "r", "i"); two("る", "r", "u"); two("れ", "r", "e"); two("ろ", "r", "o");
    two("が", "g", "a"); two("で", "d", "e"); two("を", "o", "o");
    two("や", "y", "a"); two("ゆ", "y", "u"); two("よ", "y", "o"); two("わ", "w", "a");
    one("あ", "a"); one("い", "i"); one("う", "u"); one("え", "e"); one("お", "o"); one("ん", "N");
    t.add("、", {{b}, {std::string(kProsodyBoundary)}});
    t.add("。", {{b}, {std::string(kProsodyFall)}});
    t.add("？", {{b}, {std::string(kProsodyRise)}});
    return t;
  }

 private:
  static TokenSeq split_words(const std::string& s) {
    TokenSeq out;
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && s[i] == ' ') ++i;
      std::size_t j = i;
      while (j < s.size() && s[j] != ' ') ++j;
      if (j > i) out.push_back(s.substr(i, j - i));
      i = j;
    }
    return out;
  }

  std::map<std::string, RomanizerEntry> table_;
};

/// Dual-track toy estimator. Each output symbol attends one-hot to the
/// input text token it was read from.
class RomanizerAgent final : public Agent {
 public:
  explicit RomanizerAgent(RomanizerTable table = RomanizerTable::builtin()) : table_(std::move(table)) {}

  AgentResponse handle(const AgentRequest& request) override {
    if (request.kind == RequestKind::kReset || request.kind == RequestKind::kClose) return {};
    if (request.kind != RequestKind::kDualDecode)
      throw Error(Errc::kProtocolError, "romanizer agent only supports dual_decode");
    const std::size_t F = std::min(request.frames, request.source.size());
    AgentResponse resp;
    resp.aux = TokenSeq{};
    std::vector<std::size_t> aligned;
    for (std::size_t i = 0; i < F; ++i) {
      for (const auto& cp : utf8_codepoints(request.source[i])) {
        auto e = table_.lookup(cp);
        for (std::size_t k = 0; k < e.phonemes.size(); ++k) {
          resp.tokens.push_back(e.phonemes[k]);
          resp.aux->push_back(e.prosody[k]);
          aligned.push_back(i);
        }
      }
    }
    if (!is_prefix(request.committed, resp.tokens))
      throw Error(Errc::kPrefixConflict, "committed phonemes are not a prefix of the estimate");
    AttentionMatrix att(resp.tokens.size(), std::vector<double>(F, 0.0));
    for (std::size_t j = 0; j < aligned.size(); ++j) att[j][aligned[j]] = 1.0;
    resp.attention = std::move(att);
    return resp;
  }

 private:
  RomanizerTable table_;
};

}  // namespace simulst
