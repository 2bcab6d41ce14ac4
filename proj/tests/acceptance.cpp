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

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Independent of GoogleTest and of any external agent.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "simulst/simulst.hpp"
#include "toy_sessions.hpp"

namespace simulst {
namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome metric_oracle_suite() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  for (int it = 0; it < 500; ++it) {
    const auto log = oracle::random_log(rng, 6, 3000.0, true);
    const auto t = oracle::expand(log);
    const double n = static_cast<double>(t.ideal.size());
    const double nl = std::max(n, static_cast<double>(t.reference_len));
    const auto src = oracle::source_segment_ends(t.source_ms, 300.0);
    for (bool wall : {false, true}) {
      const auto mode = wall ? DelayMode::kComputationAware : DelayMode::kIdeal;
      const double pairs[5][2] = {
          {compute_al(log, mode), oracle::al(t, wall, n)},
          {compute_laal(log, mode), oracle::al(t, wall, nl)},
          {compute_ap(log, mode), oracle::ap(t, wall)},
          {compute_dal(log, mode), oracle::dal(t, wall)},
          {compute_atd(log, mode), oracle::atd(src, oracle::pick(t, wall))},
      };
      for (const auto& p : pairs) worst = std::max(worst, std::abs(p[0] - p[1]));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.check(worst <= 1e-9, "max |closed form - oracle| = " + fmt(worst));
  o.check(secs < 5.0, "took " + fmt(secs) + " s");
  if (o.pass) o.detail = "500 logs, max error " + fmt(worst) + ", " + fmt(secs) + " s";
  return o;
}

EmissionLog single_token_commits(const std::vector<double>& d, double T, std::optional<std::size_t> ref_len) {
  std::optional<TokenSeq> ref;
  if (ref_len) ref = TokenSeq(*ref_len, "r");
  EmissionLog log("hand", ref);
  for (std::size_t j = 0; j < d.size(); ++j) log.record_commit({"t" + std::to_string(j)}, d[j], d[j]);
  log.finalize(T);
  return log;
}

Outcome hand_fixtures() {
  Outcome o;
  const auto log = single_token_commits({1000, 2000, 3000}, 3000, 4);
  const double al = compute_al(log, DelayMode::kIdeal);
  const double ap = compute_ap(log, DelayMode::kIdeal);
  const double dal = compute_dal(log, DelayMode::kIdeal);
  const double laal = compute_laal(log, DelayMode::kIdeal);
  EmissionLog atd_log("atd");
  atd_log.record_commit({"a"}, 600, 600);
  atd_log.record_commit({"b", "c", "d"}, 900, 900);
  atd_log.finalize(900);
  const double atd = compute_atd(atd_log, DelayMode::kIdeal);
  o.check(std::abs(al - 1000) <= 1e-9, "AL " + fmt(al));
  // 0.667 is the rounded form of 2/3; the exact value is checked.
  o.check(std::abs(ap - 2.0 / 3.0) <= 1e-9 && std::round(ap * 1000) == 667, "AP " + fmt(ap));
  o.check(std::abs(dal - 1000) <= 1e-9, "DAL " + fmt(dal));
  o.check(std::abs(laal - 1250) <= 1e-9, "LAAL " + fmt(laal));
  o.check(std::abs(atd - 150) <= 1e-9, "ATD " + fmt(atd));
  if (o.pass) o.detail = "AL=1000 AP=0.667 DAL=1000 LAAL=1250 ATD=150";
  return o;
}

std::vector<oracle::ToySession> random_sessions() {
  std::mt19937_64 rng(4242);
  std::vector<oracle::ToySession> out;
  for (int i = 0; i < 200; ++i) out.push_back(oracle::random_toy_session(rng, static_cast<std::size_t>(i % 4), i));
  return out;
}

Outcome la_invariants(const std::vector<oracle::ToySession>& sessions) {
  Outcome o;
  std::size_t runs = 0;
  for (const auto& s : sessions) {
    const auto src = s.source();
    auto stable = s.spec;
    stable.instability = 0;
    for (double chunk : {200.0, 500.0, 1000.0}) {
      for (std::size_t n : {1u, 2u, 3u}) {
        ToyTransducerAgent agent(s.spec);
        LocalAgreementPolicy policy({n, chunk});
        TokenSeq committed;
        bool append_only = true, la1_full = true;
        SessionOptions so;
        so.observer = [&](const RoundRecord& r) {
          append_only = append_only && r.committed_before == committed;
          committed.insert(committed.end(), r.emitted.begin(), r.emitted.end());
          if (n == 1) la1_full = la1_full && committed == r.hypothesis.tokens;
        };
        const auto log = run_session_detailed(src, agent, policy, ClockModel::ideal(), so).log;
        o.check(append_only && log.output_tokens() == committed, s.id + ": commits not append-only");
        o.check(la1_full, s.id + ": LA-1 left part of a hypothesis uncommitted");

        ToyTransducerAgent stable_agent(stable);
        o.check(run_la(src, stable_agent, {n, chunk}).output_tokens() == stable.offline(),
                s.id + ": k=0 output differs from offline decode (chunk " + fmt(chunk) + ", n=" + std::to_string(n) + ")");
        runs += 2;
      }
    }
  }
  if (o.pass) o.detail = std::to_string(sessions.size()) + " sessions, " + std::to_string(runs) + " runs";
  return o;
}

Outcome alignatt_invariants(const std::vector<oracle::ToySession>& sessions) {
  Outcome o;
  std::size_t rounds = 0;
  for (const auto& s : sessions) {
    const auto src = s.source();
    std::vector<double> prev;
    for (std::size_t f = 1; f <= 12; ++f) {
      AlignAttConfig cfg;
      cfg.f = f;
      cfg.chunk_ms = 200;
      ToyTransducerAgent agent(s.spec);
      AlignAttPolicy policy(cfg);
      SessionOptions so;
      so.observer = [&](const RoundRecord& r) {
        ++rounds;
        if (r.final_chunk) {
          o.check(r.committed_before.size() + r.emitted.size() == s.spec.entries.size(), s.id + ": final round incomplete");
        } else {
          o.check(r.emitted.size() == oracle::alignatt_brute_emit_count(s.spec, r.frames, f, r.committed_before.size()),
                  s.id + ": round " + std::to_string(r.round) + " differs from brute force (f=" + std::to_string(f) + ")");
        }
      };
      const auto d = run_session_detailed(src, agent, policy, ClockModel::ideal(), so).log.token_delays(DelayMode::kIdeal);
      if (!prev.empty()) {
        bool mono = d.size() == prev.size();
        for (std::size_t j = 0; mono && j < d.size(); ++j) mono = d[j] >= prev[j];
        o.check(mono, s.id + ": delays decreased going to f=" + std::to_string(f));
      }
      prev = d;
    }
  }
  if (o.pass) o.detail = std::to_string(rounds) + " rounds match brute force; delays monotone in f=1..12";
  return o;
}

std::vector<ManifestEntry> fixture_corpus() { return load_manifest(std::string(SIMULST_FIXTURES_DIR) + "/toy_corpus.tsv"); }

AgentFactory fixture_factory() {
  AgentFactoryOptions opt;
  opt.base_dir = SIMULST_FIXTURES_DIR;
  return make_agent_factory(opt);
}

Outcome computation_aware_mechanism() {
  Outcome o;
  const auto corpus = fixture_corpus();
  const auto factory = fixture_factory();
  RunOptions ca;
  ca.clock = ClockModel::computation_aware(CostModel::fixed_per_decode(50));
  std::size_t checked = 0;
  for (const auto& e : corpus) {
    auto gap = [&](double chunk) {
      const auto log = run_entry(PolicyKind::kLa, {chunk, 2}, e, factory, ca);
      return compute_al(log, DelayMode::kComputationAware) - compute_al(log, DelayMode::kIdeal);
    };
    const double g200 = gap(200), g1000 = gap(1000);
    o.check(g200 > g1000, e.id + ": gap at 200 ms (" + fmt(g200) + ") <= gap at 1000 ms (" + fmt(g1000) + ")");
  }
  for (auto policy : {PolicyKind::kLa, PolicyKind::kAlignAtt}) {
    for (double chunk : {200.0, 400.0, 600.0, 800.0, 1000.0}) {
      for (std::size_t p : {1u, 2u, 4u}) {
        for (const auto& e : corpus) {
          const auto log = run_entry(policy, {chunk, p}, e, factory, ca);
          if (log.token_count() == 0) continue;
          const auto i = compute_delay_metrics(log, DelayMode::kIdeal);
          const auto c = compute_delay_metrics(log, DelayMode::kComputationAware);
          const bool ok = c.al >= i.al && *c.laal >= *i.laal && c.ap >= i.ap && c.dal >= i.dal && c.atd >= i.atd &&
                          c.start_offset >= i.start_offset && c.end_offset >= i.end_offset;
          o.check(ok, e.id + ": a CA metric fell below its ideal value");
          ++checked;
        }
      }
    }
  }
  if (o.pass) o.detail = "gap(200) > gap(1000) on all " + std::to_string(corpus.size()) + " sessions; CA >= ideal on " +
                         std::to_string(checked) + " runs";
  return o;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxx > 0 && syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

/// 60 synthetic sentences of 6..20 words, ~320 ms of source per word.
std::vector<ManifestEntry> noisy_corpus(std::size_t k) {
  std::mt19937_64 rng(606);
  std::vector<ManifestEntry> out;
  for (int s = 0; s < 60; ++s) {
    ManifestEntry e;
    e.id = "noisy-" + std::to_string(s);
    const std::size_t words = 6 + rng() % 15;
    for (std::size_t w = 0; w < words; ++w) e.reference.push_back("v" + std::to_string(rng() % 200));
    e.source_duration_ms = static_cast<double>(words * (280 + rng() % 80));
    e.sample_rate = 16000;
    e.source_sample_count = static_cast<long long>(e.source_duration_ms * 16);
    e.agent_binding = "toy:k=" + std::to_string(k) + ",seed=" + std::to_string(rng() % 1000);
    out.push_back(std::move(e));
  }
  return out;
}

Outcome tradeoff_regression() {
  Outcome o;
  SweepConfig cfg;
  cfg.policy = PolicyKind::kLa;
  cfg.corpus = noisy_corpus(25);
  for (double c : {200.0, 400.0, 600.0, 800.0, 1000.0}) cfg.grid.push_back({c, 2});
  const auto rows = run_sweep(cfg, make_agent_factory({}));
  std::vector<double> chunk, bleu, al;
  for (const auto& r : rows) {
    chunk.push_back(r.chunk_ms);
    bleu.push_back(*r.bleu);
    al.push_back(*r.al);
  }
  const double rb = spearman(chunk, bleu), ra = spearman(chunk, al);
  std::string series = "BLEU";
  for (double b : bleu) series += " " + fmt(b);
  series += " | AL";
  for (double a : al) series += " " + fmt(a);
  o.check(rb >= 0.9, "Spearman(chunk, BLEU) = " + fmt(rb) + "; " + series);
  o.check(ra >= 0.9, "Spearman(chunk, AL) = " + fmt(ra) + "; " + series);
  if (o.pass) o.detail = "rho(BLEU)=" + fmt(rb) + " rho(AL)=" + fmt(ra) + "; " + series;
  return o;
}

Outcome channel_scheduler() {
  Outcome o;
  DurationModel fixed;
  fixed.per_token_ms = {{"a", 900}, {"b", 600}};
  const auto s = schedule_speech({{{"a"}, 1000}, {{"b"}, 1500}}, fixed);
  o.check(s.segments.size() == 2 && s.segments[0].starts_at_ms == 1000 && s.segments[0].ends_at_ms == 1900 &&
              s.segments[1].starts_at_ms == 1900 && s.segments[1].ends_at_ms == 2500,
          "two-request fixture is not [1000,1900], [1900,2500]");

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0, 1);
  for (int it = 0; it < 2000; ++it) {
    std::vector<TtsRequest> reqs;
    DurationModel d;
    double t = 0;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 10); i < n; ++i) {
      t += std::round(u(rng) * 900);
      const Token tok = "w" + std::to_string(i);
      d.per_token_ms[tok] = 1 + std::round(u(rng) * 1500);
      reqs.push_back({{tok}, t});
    }
    const double lat = std::round(u(rng) * 200);
    const auto sched = schedule_speech(reqs, d, lat);
    for (std::size_t i = 0; i < sched.segments.size(); ++i) {
      const auto& seg = sched.segments[i];
      o.check(seg.starts_at_ms >= seg.requested_at_ms + lat, "segment starts before its request");
      if (i > 0) o.check(seg.starts_at_ms >= sched.segments[i - 1].ends_at_ms, "overlapping segments");
    }
  }

  // Simulated runs: whenever the channel queued, speech must end no earlier than text.
  const auto corpus = fixture_corpus();
  const auto factory = fixture_factory();
  std::size_t queued_runs = 0;
  for (auto kind : {HandoffKind::kImmediate, HandoffKind::kBoundaryGated}) {
    for (double chunk : {200.0, 600.0, 1000.0}) {
      for (const auto& e : corpus) {
        const auto log = run_entry(PolicyKind::kLa, {chunk, 1}, e, factory, {});
        if (log.token_count() == 0) continue;
        SpeechOptions sp;
        sp.handoff.kind = kind;
        const auto sched = speech_schedule(log, DelayMode::kComputationAware, sp);
        bool queued = false;
        for (const auto& seg : sched.segments) queued = queued || seg.starts_at_ms > seg.requested_at_ms;
        if (!queued) continue;
        ++queued_runs;
        const auto text = compute_offsets(log, DelayMode::kComputationAware);
        const auto speech = compute_offsets(sched, log.source_duration_ms());
        o.check(speech.end_offset >= text.end_offset, e.id + ": speech ended before text");
      }
    }
  }
  o.check(queued_runs > 0, "no simulated run queued");
  if (o.pass) o.detail = "fixture exact; 2000 random schedules overlap-free; " + std::to_string(queued_runs) +
                         " queued runs with End_Offset(speech) >= End_Offset(text)";
  return o;
}

Outcome ratio_filter_checks() {
  Outcome o;
  auto entry = [](long long samples, std::size_t tokens) {
    ManifestEntry e;
    e.id = "r";
    e.source_sample_count = samples;
    e.source_duration_ms = static_cast<double>(samples) / 16.0;
    e.reference = TokenSeq(tokens, "w");
    return e;
  };
  o.check(ratio_filter(entry(16000, 5)), "3200 should be kept");
  o.check(!ratio_filter(entry(16000, 3)), "5333.3 should be excluded");
  o.check(ratio_filter(entry(8000, 2)), "4000 should be kept");
  std::mt19937_64 rng(1000);
  for (int it = 0; it < 1000; ++it) {
    auto e = entry(static_cast<long long>(rng() % 500000), 1 + rng() % 80);
    const bool kept = ratio_filter(e);
    e.reference.resize(e.reference.size() + 1 + rng() % 20, "w");
    o.check(!kept || ratio_filter(e), "adding tokens flipped keep to exclude");
  }
  if (o.pass) o.detail = "3 threshold fixtures; monotone on 1000 random entries";
  return o;
}

Outcome bleu_checks() {
  Outcome o;
  const std::vector<TokenSeq> refs{{"the", "cat", "sat", "on", "the", "mat"}, {"a", "b", "c", "d", "e"}};
  const double perfect = corpus_bleu(refs, refs);
  const double disjoint = corpus_bleu({{"p", "q", "r", "s"}}, {{"w", "x", "y", "z"}});
  BleuOptions two;
  two.max_n = 2;
  const double short_s = corpus_bleu({{"the", "cat"}}, {{"the", "cat", "sat"}}, two);
  o.check(perfect == 100.0, "perfect match gives " + fmt(perfect));
  o.check(disjoint == 0.0, "disjoint gives " + fmt(disjoint));
  o.check(std::abs(short_s - 100.0 * std::exp(-0.5)) <= 1e-6, "short sentence gives " + fmt(short_s));
  if (o.pass) o.detail = "100 / 0 / " + fmt(short_s);
  return o;
}

Outcome serialization() {
  Outcome o;
  std::mt19937_64 rng(10);
  LogFile file{{"la", 950, 2, 0, "computation_aware", "fixed:50"}, {}};
  for (int i = 0; i < 200; ++i) file.sessions.push_back(oracle::random_log(rng, 6, 3000, i % 2 == 0));
  RunOptions ca;
  ca.clock = ClockModel::computation_aware(CostModel::fixed_per_decode(50));
  for (auto& l : run_corpus(PolicyKind::kLa, {950, 2}, fixture_corpus(), fixture_factory(), ca))
    file.sessions.push_back(std::move(l));
  std::ostringstream a;
  write_log_file(a, file);
  std::istringstream ia(a.str());
  const auto back = read_log_file(ia);
  std::ostringstream b;
  write_log_file(b, back);
  o.check(a.str() == b.str(), "emission log text changed on round trip");
  bool equal = back.sessions.size() == file.sessions.size();
  for (std::size_t i = 0; equal && i < back.sessions.size(); ++i) equal = back.sessions[i] == file.sessions[i];
  o.check(equal, "emission logs differ after round trip");

  TradeoffRow en_de;
  en_de.policy = "la";
  en_de.chunk_ms = 960;
  en_de.param = 2;
  en_de.bleu = 29.978;
  en_de.al = 1973.799;
  en_de.laal = 2193.352;
  en_de.ap = 0.846;
  en_de.dal = 2863.481;
  en_de.atd = 1887.436;
  std::vector<TradeoffRow> rows{en_de};
  SweepConfig cfg;
  cfg.corpus = fixture_corpus();
  cfg.grid = {{200, 1}, {950, 2}};
  cfg.run = ca;
  for (auto& r : run_sweep(cfg, fixture_factory())) rows.push_back(std::move(r));
  std::ostringstream csv;
  write_tradeoff(csv, rows, {"seed=0"});
  std::istringstream icsv(csv.str());
  const auto table = parse_tradeoff(icsv);
  std::ostringstream csv2;
  write_tradeoff(csv2, table.rows, table.comment);
  o.check(table.rows == rows, "trade-off rows differ after round trip");
  o.check(csv.str() == csv2.str(), "trade-off CSV text changed on round trip");
  o.check(format_tradeoff_row(table.rows[0]) == "la,960,2,29.978,1973.799,2193.352,0.846,2863.481,1887.436,,,,,,,",
          "En-De row text changed");
  if (o.pass) o.detail = std::to_string(file.sessions.size()) + " logs and " + std::to_string(rows.size()) +
                         " CSV rows byte-identical, En-De row included";
  return o;
}

}  // namespace
}  // namespace simulst

int main() {
  using namespace simulst;
  const auto sessions = random_sessions();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric-oracle-suite", metric_oracle_suite},
      {"hand-worked-fixtures", hand_fixtures},
      {"la-invariants", [&] { return la_invariants(sessions); }},
      {"alignatt-invariants", [&] { return alignatt_invariants(sessions); }},
      {"computation-aware-mechanism", computation_aware_mechanism},
      {"quality-latency-tradeoff", tradeoff_regression},
      {"channel-scheduler", channel_scheduler},
      {"ratio-filter", ratio_filter_checks},
      {"bleu", bleu_checks},
      {"serialization", serialization},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
