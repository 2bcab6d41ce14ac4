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

// Session driver. Source audio arrives in chunk_ms increments; after each
// chunk the agent re-decodes with the committed prefix forced and the policy
// decides what to commit.
//
// Clocks: the ideal delay of a commit is the source time consumed at its
// chunk boundary t_k. The computation-aware delay adds the computation time
// charged so far: c_k = t_k + sum_{i<=k} cost_i.

#pragma once

#include <chrono>
#include <concepts>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "simulst/agents.hpp"
#include "simulst/corpus_tools.hpp"
#include "simulst/errors.hpp"
#include "simulst/external_agent.hpp"
#include "simulst/metrics.hpp"
#include "simulst/policy_alignatt.hpp"
#include "simulst/policy_la.hpp"
#include "simulst/s2s_cascade.hpp"
#include "simulst/timeline.hpp"

namespace simulst {

// ---------------------------------------------------------------------------
// Clocks and cost models

enum class ClockMode { kIdeal, kComputationAware };

struct CostModel {
  enum class Kind { kMeasured, kFixedPerDecode, kPerFrame };
  Kind kind = Kind::kMeasured;
  double value = 0.0;  // ms per decode, or ms per frame

  static CostModel measured() { return {}; }
  static CostModel fixed_per_decode(double ms) { return {Kind::kFixedPerDecode, ms}; }
  static CostModel per_frame(double ms_per_frame) { return {Kind::kPerFrame, ms_per_frame}; }

  /// "measured", "fixed:<ms>" or "per-frame:<ms>".
  static CostModel parse(std::string_view s) {
    if (s == "measured") return measured();
    auto value_of = [&](std::string_view prefix) -> std::optional<double> {
      if (s.substr(0, prefix.size()) != prefix) return std::nullopt;
      auto v = parse_double(s.substr(prefix.size()));
      if (!v || *v < 0.0) throw Error(Errc::kInvalidArgument, "invalid cost value in '" + std::string(s) + "'");
      return v;
    };
    if (auto v = value_of("fixed:")) return fixed_per_decode(*v);
    if (auto v = value_of("per-frame:")) return per_frame(*v);
    throw Error(Errc::kInvalidArgument, "unknown cost model '" + std::string(s) +
                                            "' (use measured, fixed:<ms> or per-frame:<ms>)");
  }

  std::string describe() const {
    switch (kind) {
      case Kind::kMeasured: return "measured";
      case Kind::kFixedPerDecode: return "fixed:" + format_double(value);
      case Kind::kPerFrame: return "per-frame:" + format_double(value);
    }
    return "measured";
  }
};

struct ClockModel {
  ClockMode mode = ClockMode::kIdeal;
  CostModel cost;

  static ClockModel ideal() { return {}; }
  static ClockModel computation_aware(CostModel cost) { return {ClockMode::kComputationAware, cost}; }

  std::string describe_mode() const { return mode == ClockMode::kIdeal ? "ideal" : "computation_aware"; }
};

/// Computation time charged for one decode call over `frames` frames.
inline double apply_cost(const ClockModel& clock, std::size_t frames, double measured_ms) {
  if (clock.mode == ClockMode::kIdeal) return 0.0;
  switch (clock.cost.kind) {
    case CostModel::Kind::kMeasured: return measured_ms;
    case CostModel::Kind::kFixedPerDecode: return clock.cost.value;
    case CostModel::Kind::kPerFrame: return clock.cost.value * static_cast<double>(frames);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Session loop

template <typename P>
concept StreamingPolicy = requires(P p, const P& cp, const Hypothesis& h, std::size_t frames, bool final_chunk) {
  { cp.chunk_ms() } -> std::convertible_to<double>;
  { cp.param() } -> std::convertible_to<double>;
  { cp.committed() } -> std::convertible_to<const TokenSeq&>;
  { p.step(h, frames, final_chunk) } -> std::same_as<TokenSeq>;
  { P::kRequiresAttention } -> std::convertible_to<bool>;
  { P::kName } -> std::convertible_to<std::string_view>;
};

static_assert(StreamingPolicy<LocalAgreementPolicy>);
static_assert(StreamingPolicy<AlignAttPolicy>);

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  double chunk_end_ms = 0.0;
  std::size_t frames = 0;
  bool final_chunk = false;
  TokenSeq committed_before;
  Hypothesis hypothesis;
  TokenSeq emitted;
  double charged_ms = 0.0;
  double wall_ms = 0.0;
};

using RoundObserver = std::function<void(const RoundRecord&)>;

struct SessionOptions {
  std::string id;
  int beam = 1;
  bool send_reset = true;
  RoundObserver observer;
};

struct SessionStats {
  std::size_t decode_calls = 0;
  double charged_ms = 0.0;
};

struct SessionRun {
  EmissionLog log;
  SessionStats stats;
};

template <StreamingPolicy P>
SessionRun run_session_detailed(const SourceStream& source, Agent& agent, P& policy, const ClockModel& clock,
                                const SessionOptions& opts = {}) {
  const double T = source.total_duration_ms();
  const double chunk = policy.chunk_ms();
  if (!(chunk > 0.0)) throw Error(Errc::kInvalidArgument, "chunk_ms must be positive");

  SessionRun run{EmissionLog(opts.id, source.reference()), {}};
  if (opts.send_reset) {
    AgentRequest reset;
    reset.kind = RequestKind::kReset;
    agent.handle(reset);
  }

  double charged_total = 0.0;
  for (std::size_t k = 1;; ++k) {
    const double boundary = std::min(static_cast<double>(k) * chunk, T);
    const bool final_chunk = boundary >= T - kTimeEpsilonMs;
    const double t = final_chunk ? T : boundary;
    const std::size_t frames = source.frames_available(t);

    AgentRequest req;
    req.kind = RequestKind::kDecode;
    req.frames = frames;
    req.committed = policy.committed();
    req.beam = opts.beam;

    const auto started = std::chrono::steady_clock::now();
    AgentResponse resp = agent.handle(req);
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    ++run.stats.decode_calls;

    if (!is_prefix(req.committed, resp.tokens))
      throw Error(Errc::kPrefixConflict, "agent output does not start with the committed prefix");
    if constexpr (P::kRequiresAttention) resp = validate_attention(std::move(resp), frames);

    const double charged = apply_cost(clock, frames, resp.compute_ms.value_or(elapsed));
    charged_total += charged;

    RoundRecord rec;
    if (opts.observer) {
      rec.round = k;
      rec.chunk_end_ms = t;
      rec.frames = frames;
      rec.final_chunk = final_chunk;
      rec.committed_before = policy.committed();
      rec.charged_ms = charged;
    }
    Hypothesis hyp{std::move(resp.tokens), std::move(resp.attention)};
    TokenSeq fresh = policy.step(hyp, frames, final_chunk);
    const double wall = clock.mode == ClockMode::kIdeal ? t : t + charged_total;
    if (opts.observer) {
      rec.hypothesis = std::move(hyp);
      rec.emitted = fresh;
      rec.wall_ms = wall;
      opts.observer(rec);
    }
    if (!fresh.empty()) run.log.record_commit(std::move(fresh), t, wall);
    if (final_chunk) break;
  }
  run.stats.charged_ms = charged_total;
  run.log.finalize(T);
  return run;
}

template <StreamingPolicy P>
EmissionLog run_session(const SourceStream& source, Agent& agent, P policy, const ClockModel& clock,
                        const SessionOptions& opts = {}) {
  return run_session_detailed(source, agent, policy, clock, opts).log;
}

inline EmissionLog run_la(const SourceStream& source, Agent& agent, const LaConfig& cfg,
                          const ClockModel& clock = ClockModel::ideal(), const SessionOptions& opts = {}) {
  return run_session(source, agent, LocalAgreementPolicy(cfg), clock, opts);
}

inline EmissionLog run_alignatt(const SourceStream& source, Agent& agent, const AlignAttConfig& cfg,
                                const ClockModel& clock = ClockModel::ideal(), const SessionOptions& opts = {}) {
  return run_session(source, agent, AlignAttPolicy(cfg), clock, opts);
}

// ---------------------------------------------------------------------------
// Agent bindings
//
//   ""                                  toy transducer with default settings
//   "toy" | "toy:k=1,seed=3,frame_ms=40"  toy transducer over the reference
//   "toy-file:<path>"                   toy transducer loaded from JSON
//   "cmd:<shell command>"               external agent process

inline ToyTransducerSpec toy_spec_from_json(const nlohmann::json& j) {
  ToyTransducerSpec spec;
  spec.total_frames = j.at("total_frames").get<std::size_t>();
  spec.instability = j.value("instability", std::size_t{0});
  spec.seed = j.value("seed", std::uint64_t{0});
  for (const auto& e : j.at("entries"))
    spec.entries.push_back({e.at("start").get<std::size_t>(), e.at("end").get<std::size_t>(), e.at("token").get<std::string>()});
  spec.validate();
  return spec;
}

inline nlohmann::ordered_json toy_spec_to_json(const ToyTransducerSpec& spec, std::optional<double> frame_ms = std::nullopt) {
  nlohmann::ordered_json j;
  if (frame_ms) j["frame_ms"] = *frame_ms;
  j["total_frames"] = spec.total_frames;
  j["instability"] = spec.instability;
  j["seed"] = spec.seed;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : spec.entries) j["entries"].push_back({{"start", e.span_start}, {"end", e.span_end}, {"token", e.token}});
  return j;
}

struct SessionAgent {
  std::unique_ptr<Agent> agent;
  double frame_ms = 40.0;
};

using AgentFactory = std::function<SessionAgent(const ManifestEntry&)>;

struct AgentFactoryOptions {
  double frame_ms = 40.0;
  std::uint64_t seed = 0;
  std::size_t instability = 0;                 // default k for bare toy bindings
  std::optional<std::string> agent_cmd;        // overrides every binding
  std::filesystem::path base_dir;              // resolves relative toy-file paths
  ExternalAgentOptions external;
};

inline SessionAgent make_session_agent(const ManifestEntry& entry, const AgentFactoryOptions& opt) {
  const std::string binding = opt.agent_cmd ? "cmd:" + *opt.agent_cmd : entry.agent_binding;
  if (binding.rfind("cmd:", 0) == 0) {
    return {std::make_unique<ExternalAgent>(binding.substr(4), opt.external), opt.frame_ms};
  }
  if (binding.rfind("toy-file:", 0) == 0) {
    std::filesystem::path p = binding.substr(9);
    if (p.is_relative()) p = opt.base_dir / p;
    std::ifstream in(p);
    if (!in) throw Error(Errc::kIoError, "cannot open toy spec " + p.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kParseError, p.string() + ": " + e.what());
    }
    const double frame_ms = j.value("frame_ms", opt.frame_ms);
    auto spec = toy_spec_from_json(j);
    const auto frames = SourceStream::uniform_frame_count(entry.source_duration_ms, frame_ms);
    if (frames != spec.total_frames)
      throw Error(Errc::kInvalidArgument, "toy spec for '" + entry.id + "' has " + std::to_string(spec.total_frames) +
                                              " frames but the source has " + std::to_string(frames));
    return {std::make_unique<ToyTransducerAgent>(std::move(spec)), frame_ms};
  }
  if (binding.empty() || binding == "toy" || binding.rfind("toy:", 0) == 0) {
    std::size_t k = opt.instability;
    std::uint64_t seed = opt.seed;
    double frame_ms = opt.frame_ms;
    if (binding.size() > 4) {
      for (const auto& kv : split(binding.substr(4), ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(Errc::kInvalidArgument, "bad toy option '" + kv + "'");
        const auto key = kv.substr(0, eq);
        const auto val = kv.substr(eq + 1);
        if (key == "k") {
          auto v = parse_int(val);
          if (!v || *v < 0) throw Error(Errc::kInvalidArgument, "bad toy k '" + val + "'");
          k = static_cast<std::size_t>(*v);
        } else if (key == "seed") {
          auto v = parse_int(val);
          if (!v || *v < 0) throw Error(Errc::kInvalidArgument, "bad toy seed '" + val + "'");
          seed = static_cast<std::uint64_t>(*v);
        } else if (key == "frame_ms") {
          auto v = parse_double(val);
          if (!v || !(*v > 0.0)) throw Error(Errc::kInvalidArgument, "bad toy frame_ms '" + val + "'");
          frame_ms = *v;
        } else {
          throw Error(Errc::kInvalidArgument, "unknown toy option '" + key + "'");
        }
      }
    }
    const auto frames = SourceStream::uniform_frame_count(entry.source_duration_ms, frame_ms);
    auto spec = synthesize_toy_spec(entry.reference, frames, k, seed ^ detail::fnv1a(entry.id));
    return {std::make_unique<ToyTransducerAgent>(std::move(spec)), frame_ms};
  }
  throw Error(Errc::kInvalidArgument, "unknown agent binding '" + binding + "' for entry '" + entry.id + "'");
}

inline AgentFactory make_agent_factory(AgentFactoryOptions opt) {
  return [opt = std::move(opt)](const ManifestEntry& e) { return make_session_agent(e, opt); };
}

// ---------------------------------------------------------------------------
// Corpus runs and sweeps

enum class PolicyKind { kLa, kAlignAtt };

inline std::string_view policy_name(PolicyKind p) { return p == PolicyKind::kLa ? "la" : "alignatt"; }

inline PolicyKind parse_policy(std::string_view s) {
  if (s == "la") return PolicyKind::kLa;
  if (s == "alignatt") return PolicyKind::kAlignAtt;
  throw Error(Errc::kInvalidArgument, "unknown policy '" + std::string(s) + "' (use la or alignatt)");
}

struct GridPoint {
  double chunk_ms = 1000.0;
  std::size_t param = 2;  // n for LA, f for AlignAtt

  bool operator==(const GridPoint&) const = default;
};

enum class OutputKind { kText, kSpeech };

struct SpeechOptions {
  HandoffPolicy handoff;
  DurationModel durations;
  double synthesis_latency_ms = 0.0;
  /// Dual-track estimator for estimator-gated handoff; defaults to the toy romanizer.
  std::function<std::unique_ptr<Agent>()> estimator_factory;
};

struct RunOptions {
  ClockModel clock;
  int beam = 1;
  OutputKind output = OutputKind::kText;
  SpeechOptions speech;
  AtdConfig atd;
  BleuOptions bleu;
};

struct SweepConfig {
  PolicyKind policy = PolicyKind::kLa;
  std::vector<GridPoint> grid;
  std::vector<ManifestEntry> corpus;
  RunOptions run;
};

inline EmissionLog run_entry(PolicyKind policy, const GridPoint& point, const ManifestEntry& entry,
                             const AgentFactory& factory, const RunOptions& opt) {
  auto sa = factory(entry);
  const auto source = SourceStream::uniform(entry.source_duration_ms, sa.frame_ms, entry.reference);
  SessionOptions so;
  so.id = entry.id;
  so.beam = opt.beam;
  if (policy == PolicyKind::kLa)
    return run_la(source, *sa.agent, LaConfig{point.param, point.chunk_ms}, opt.clock, so);
  AlignAttConfig cfg;
  cfg.f = point.param;
  cfg.chunk_ms = point.chunk_ms;
  return run_alignatt(source, *sa.agent, cfg, opt.clock, so);
}

inline std::vector<EmissionLog> run_corpus(PolicyKind policy, const GridPoint& point,
                                           const std::vector<ManifestEntry>& corpus, const AgentFactory& factory,
                                           const RunOptions& opt) {
  std::vector<EmissionLog> logs;
  logs.reserve(corpus.size());
  for (const auto& e : corpus) logs.push_back(run_entry(policy, point, e, factory, opt));
  return logs;
}

inline ChannelSchedule speech_schedule(const EmissionLog& log, DelayMode clock, const SpeechOptions& speech) {
  HandoffPolicy hp = speech.handoff;
  hp.clock = clock;
  std::unique_ptr<Agent> estimator;
  if (hp.kind == HandoffKind::kEstimatorGated)
    estimator = speech.estimator_factory ? speech.estimator_factory() : std::make_unique<RomanizerAgent>();
  return schedule_speech(handoff(log, hp, estimator.get()), speech.durations, speech.synthesis_latency_ms);
}

namespace detail {

struct MeanAcc {
  double sum = 0.0;
  std::size_t n = 0;
  bool valid = true;
  void add(double v) {
    sum += v;
    ++n;
  }
  std::optional<double> get() const {
    if (!valid || n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

}  // namespace detail

/// Which metric modes to fill in a summarized row.
struct ScoreModes {
  bool ideal = true;
  bool computation_aware = true;
};

/// Corpus-level row: BLEU over all sessions, latency averaged over sessions
/// that produced output.
inline TradeoffRow summarize_logs(std::string_view policy, double chunk_ms, double param,
                                  const std::vector<EmissionLog>& logs, const RunOptions& opt,
                                  ScoreModes modes = {}) {
  TradeoffRow row;
  row.policy = std::string(policy);
  row.chunk_ms = chunk_ms;
  row.param = param;

  std::vector<TokenSeq> hyps;
  std::vector<TokenSeq> refs;
  bool all_refs = true;
  for (const auto& log : logs) {
    if (!log.reference_tokens()) {
      all_refs = false;
      continue;
    }
    hyps.push_back(log.output_tokens());
    refs.push_back(*log.reference_tokens());
  }
  if (all_refs && !logs.empty()) row.bleu = corpus_bleu(hyps, refs, opt.bleu);

  detail::MeanAcc al, laal, ap, dal, atd, al_ca, laal_ca, ap_ca, dal_ca, atd_ca, start, end;
  for (const auto& log : logs) {
    if (!log.finalized()) throw Error(Errc::kNotFinalized, "log '" + log.id() + "' is not finalized");
    if (log.token_count() == 0) continue;
    const double T = log.source_duration_ms();
    const bool has_ref = log.reference_tokens().has_value();
    if (!has_ref) laal.valid = laal_ca.valid = false;
    auto fill = [&](DelayMode mode, detail::MeanAcc& a_al, detail::MeanAcc& a_laal, detail::MeanAcc& a_ap,
                    detail::MeanAcc& a_dal, detail::MeanAcc& a_atd) {
      a_al.add(compute_al(log, mode));
      if (has_ref) a_laal.add(compute_laal(log, mode));
      if (T > 0.0) a_ap.add(compute_ap(log, mode));
      a_dal.add(compute_dal(log, mode));
      if (opt.output == OutputKind::kText) {
        a_atd.add(compute_atd(log, mode, opt.atd));
      } else {
        const auto sched = speech_schedule(log, mode, opt.speech);
        if (!sched.segments.empty()) a_atd.add(compute_atd(T, sched, opt.atd));
      }
    };
    if (modes.ideal) {
      fill(DelayMode::kIdeal, al, laal, ap, dal, atd);
      if (opt.output == OutputKind::kText) {
        const auto off = compute_offsets(log, DelayMode::kIdeal);
        start.add(off.start_offset);
        end.add(off.end_offset);
      } else if (const auto sched = speech_schedule(log, DelayMode::kIdeal, opt.speech); !sched.segments.empty()) {
        const auto off = compute_offsets(sched, T);
        start.add(off.start_offset);
        end.add(off.end_offset);
      }
    }
    if (modes.computation_aware) fill(DelayMode::kComputationAware, al_ca, laal_ca, ap_ca, dal_ca, atd_ca);
  }
  row.al = al.get();
  row.laal = laal.get();
  row.ap = ap.get();
  row.dal = dal.get();
  row.atd = atd.get();
  row.al_ca = al_ca.get();
  row.laal_ca = laal_ca.get();
  row.ap_ca = ap_ca.get();
  row.dal_ca = dal_ca.get();
  row.atd_ca = atd_ca.get();
  row.start_offset = start.get();
  row.end_offset = end.get();
  return row;
}

struct SweepPoint {
  GridPoint point;
  std::vector<EmissionLog> logs;
  TradeoffRow row;
};

/// Runs every grid point over the corpus, in grid order.
inline std::vector<SweepPoint> run_sweep_detailed(const SweepConfig& cfg, const AgentFactory& factory) {
  if (cfg.grid.empty()) throw Error(Errc::kInvalidArgument, "sweep grid is empty");
  std::vector<SweepPoint> out;
  out.reserve(cfg.grid.size());
  for (const auto& p : cfg.grid) {
    auto logs = run_corpus(cfg.policy, p, cfg.corpus, factory, cfg.run);
    auto row = summarize_logs(policy_name(cfg.policy), p.chunk_ms, static_cast<double>(p.param), logs, cfg.run);
    out.push_back({p, std::move(logs), std::move(row)});
  }
  return out;
}

inline std::vector<TradeoffRow> run_sweep(const SweepConfig& cfg, const AgentFactory& factory) {
  std::vector<TradeoffRow> rows;
  for (auto& p : run_sweep_detailed(cfg, factory)) rows.push_back(std::move(p.row));
  return rows;
}

}  // namespace simulst
