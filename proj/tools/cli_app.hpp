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

// `simulst` command-line driver. Exit codes: 0 success, 1 validation or
// usage error, 2 agent or protocol failure.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "simulst/simulst.hpp"

namespace simulst::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitAgent = 2;
inline constexpr const char* kAgentCmdEnv = "SIMULST_AGENT_CMD";

/// "1..12", "200..1000:200" or "200,500,1000".
inline std::vector<double> parse_grid_values(const std::string& spec) {
  std::vector<double> out;
  if (auto dots = spec.find(".."); dots != std::string::npos) {
    auto rest = spec.substr(dots + 2);
    double step = 1.0;
    if (auto colon = rest.find(':'); colon != std::string::npos) {
      auto s = parse_double(rest.substr(colon + 1));
      if (!s || !(*s > 0.0)) throw Error(Errc::kInvalidArgument, "bad range step in '" + spec + "'");
      step = *s;
      rest = rest.substr(0, colon);
    }
    const auto lo = parse_double(spec.substr(0, dots));
    const auto hi = parse_double(rest);
    if (!lo || !hi || *hi < *lo) throw Error(Errc::kInvalidArgument, "bad range '" + spec + "'");
    for (std::size_t i = 0;; ++i) {
      const double v = *lo + static_cast<double>(i) * step;
      if (v > *hi + 1e-9) break;
      out.push_back(v);
    }
    return out;
  }
  for (const auto& part : split(spec, ',')) {
    const auto v = parse_double(part);
    if (!v) throw Error(Errc::kInvalidArgument, "bad number '" + part + "' in '" + spec + "'");
    out.push_back(*v);
  }
  return out;
}

inline std::vector<std::size_t> parse_grid_ints(const std::string& spec, const char* what) {
  std::vector<std::size_t> out;
  for (double v : parse_grid_values(spec)) {
    if (v < 1.0 || v != std::floor(v))
      throw Error(Errc::kInvalidArgument, std::string(what) + " values must be positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

/// Small English corpus used when no manifest is given.
inline std::vector<ManifestEntry> builtin_demo_corpus() {
  auto entry = [](std::string id, double ms, std::string ref) {
    ManifestEntry e;
    e.id = std::move(id);
    e.source_duration_ms = ms;
    e.sample_rate = 16000;
    e.source_sample_count = static_cast<long long>(ms * 16);
    e.reference = split_tokens(ref);
    return e;
  };
  return {
      entry("demo-1", 4200, "the committee approved the budget for the next fiscal year ."),
      entry("demo-2", 3100, "formula one cars race through the streets of monaco ."),
      entry("demo-3", 5600, "we trained the model on prefix pairs and evaluated it on the test set ."),
  };
}

struct CommonRunFlags {
  std::string policy = "la";
  std::string manifest;
  std::string clock = "ideal";
  std::string cost = "measured";
  std::uint64_t seed = 0;
  double frame_ms = 40.0;
  std::size_t instability = 0;
  std::string agent_cmd;
  int beam = 1;
  long long timeout_ms = 60'000;
  std::string output = "text";
  std::string handoff = "immediate";
  std::size_t estimator_f = 1;
};

inline void add_common_run_flags(CLI::App* cmd, CommonRunFlags& f) {
  cmd->add_option("--policy", f.policy, "la or alignatt")->check(CLI::IsMember({"la", "alignatt"}));
  cmd->add_option("--manifest", f.manifest, "Tab-separated manifest (default: built-in demo corpus)");
  cmd->add_option("--clock", f.clock, "ideal or ca (computation-aware)")->check(CLI::IsMember({"ideal", "ca"}));
  cmd->add_option("--cost", f.cost, "measured, fixed:<ms> or per-frame:<ms>");
  cmd->add_option("--seed", f.seed, "Seed for toy agents");
  cmd->add_option("--frame-ms", f.frame_ms, "Frame duration for toy bindings")->check(CLI::PositiveNumber);
  cmd->add_option("--k", f.instability, "Instability of bare toy bindings");
  cmd->add_option("--agent-cmd", f.agent_cmd, std::string("External agent command (env ") + kAgentCmdEnv + ")");
  cmd->add_option("--beam", f.beam, "Beam size passed to agents")->check(CLI::PositiveNumber);
  cmd->add_option("--timeout-ms", f.timeout_ms, "External agent response timeout")->check(CLI::PositiveNumber);
}

inline void add_output_flags(CLI::App* cmd, CommonRunFlags& f) {
  cmd->add_option("--output", f.output, "text or speech latency")->check(CLI::IsMember({"text", "speech"}));
  cmd->add_option("--handoff", f.handoff, "immediate, boundary or estimator")
      ->check(CLI::IsMember({"immediate", "boundary", "estimator"}));
  cmd->add_option("--estimator-f", f.estimator_f, "AlignAtt margin of the dual-track estimator")
      ->check(CLI::PositiveNumber);
}

inline HandoffKind parse_handoff(const std::string& s) {
  if (s == "boundary") return HandoffKind::kBoundaryGated;
  if (s == "estimator") return HandoffKind::kEstimatorGated;
  return HandoffKind::kImmediate;
}

inline RunOptions make_run_options(const CommonRunFlags& f) {
  RunOptions opt;
  opt.clock = f.clock == "ca" ? ClockModel::computation_aware(CostModel::parse(f.cost)) : ClockModel::ideal();
  opt.beam = f.beam;
  opt.output = f.output == "speech" ? OutputKind::kSpeech : OutputKind::kText;
  opt.speech.handoff.kind = parse_handoff(f.handoff);
  opt.speech.handoff.estimator_f = f.estimator_f;
  return opt;
}

inline std::vector<ManifestEntry> load_corpus(const CommonRunFlags& f) {
  return f.manifest.empty() ? builtin_demo_corpus() : load_manifest(f.manifest);
}

inline AgentFactory make_factory(const CommonRunFlags& f) {
  AgentFactoryOptions opt;
  opt.frame_ms = f.frame_ms;
  opt.seed = f.seed;
  opt.instability = f.instability;
  if (!f.agent_cmd.empty()) {
    opt.agent_cmd = f.agent_cmd;
  } else if (const char* env = std::getenv(kAgentCmdEnv); env != nullptr && *env != '\0') {
    opt.agent_cmd = std::string(env);
  }
  if (!f.manifest.empty()) opt.base_dir = std::filesystem::path(f.manifest).parent_path();
  opt.external.timeout = std::chrono::milliseconds(f.timeout_ms);
  return make_agent_factory(std::move(opt));
}

inline std::string cost_label(const CommonRunFlags& f) {
  return f.clock == "ca" ? CostModel::parse(f.cost).describe() : "none";
}

template <typename Fn>
void with_output(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(fallback);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path);
  fn(out);
  if (!out) throw Error(Errc::kIoError, "write failed for " + path);
}

inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Streaming translation policy simulator and latency scorer", "simulst"};
  app.require_subcommand(1);

  // simulate ---------------------------------------------------------------
  CommonRunFlags sim;
  double sim_chunk = 0.0;
  std::size_t sim_n = 2;
  std::size_t sim_f = 1;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Run one policy configuration and write emission logs");
  add_common_run_flags(simulate, sim);
  simulate->add_option("--chunk-ms", sim_chunk, "Chunk size in ms (default 1000 for la, 800 for alignatt)")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--n", sim_n, "LA agreement window")->check(CLI::PositiveNumber);
  simulate->add_option("--f", sim_f, "AlignAtt frame margin")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim_out, "Emission log file (JSON Lines)")->required();

  // sweep ------------------------------------------------------------------
  CommonRunFlags sw;
  std::string sw_chunks;
  std::string sw_n = "2";
  std::string sw_f = "1";
  std::string sw_out;
  std::string sw_logs_dir;
  auto* sweep = app.add_subcommand("sweep", "Sweep chunk size and n/f, write a trade-off CSV");
  add_common_run_flags(sweep, sw);
  add_output_flags(sweep, sw);
  sweep->add_option("--chunk-ms", sw_chunks, "List or range, e.g. 200..1000:200");
  sweep->add_option("--n", sw_n, "LA window list or range");
  sweep->add_option("--f", sw_f, "AlignAtt margin list or range, e.g. 1..12");
  sweep->add_option("--out", sw_out, "CSV path (default stdout)");
  sweep->add_option("--logs-dir", sw_logs_dir, "Also write one emission log file per grid point");

  // score ------------------------------------------------------------------
  CommonRunFlags sc;
  std::vector<std::string> sc_logs;
  std::string sc_mode = "both";
  std::string sc_out;
  auto* score = app.add_subcommand("score", "Compute metric rows from emission logs");
  score->add_option("--logs", sc_logs, "Emission log files")->required()->check(CLI::ExistingFile);
  score->add_option("--mode", sc_mode, "ideal, ca or both")->check(CLI::IsMember({"ideal", "ca", "both"}));
  score->add_option("--out", sc_out, "CSV path (default stdout)");
  add_output_flags(score, sc);

  // diagram ----------------------------------------------------------------
  CommonRunFlags dg;
  std::string dg_logs;
  std::string dg_id;
  std::string dg_prefix;
  std::string dg_clock = "ca";
  std::size_t dg_width = 80;
  auto* diagram = app.add_subcommand("diagram", "Render a timing diagram for one session");
  diagram->add_option("--logs", dg_logs, "Emission log file")->required()->check(CLI::ExistingFile);
  diagram->add_option("--id", dg_id, "Session id (default: first session)");
  diagram->add_option("--out-prefix", dg_prefix, "Writes <prefix>.json and <prefix>.txt")->required();
  diagram->add_option("--clock", dg_clock, "ideal or ca")->check(CLI::IsMember({"ideal", "ca"}));
  diagram->add_option("--width", dg_width, "Text render width")->check(CLI::Range(10, 1000));
  diagram->add_option("--handoff", dg.handoff, "immediate, boundary or estimator")
      ->check(CLI::IsMember({"immediate", "boundary", "estimator"}));
  diagram->add_option("--estimator-f", dg.estimator_f, "AlignAtt margin of the dual-track estimator")
      ->check(CLI::PositiveNumber);

  // filter -----------------------------------------------------------------
  std::string fl_manifest;
  std::string fl_out;
  double fl_ratio = 4000.0;
  auto* filter = app.add_subcommand("filter", "Drop entries whose samples-per-token ratio exceeds a maximum");
  filter->add_option("--manifest", fl_manifest, "Input manifest")->required()->check(CLI::ExistingFile);
  filter->add_option("--max-ratio", fl_ratio, "Maximum input samples per output token")->check(CLI::PositiveNumber);
  filter->add_option("--out", fl_out, "Filtered manifest (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    std::string cmd;
    for (auto* sub : app.get_subcommands()) cmd = " " + sub->get_name();
    err << "error: " << e.what() << " (run 'simulst" << cmd << " --help' for usage)\n";
    return kExitValidation;
  }

  try {
    if (simulate->parsed()) {
      const auto policy = parse_policy(sim.policy);
      if (sim_chunk <= 0.0) sim_chunk = policy == PolicyKind::kLa ? 1000.0 : 800.0;
      const GridPoint point{sim_chunk, policy == PolicyKind::kLa ? sim_n : sim_f};
      const auto corpus = load_corpus(sim);
      const auto opt = make_run_options(sim);
      LogFile file;
      file.header = {std::string(policy_name(policy)), point.chunk_ms, static_cast<double>(point.param), sim.seed,
                     opt.clock.describe_mode(), cost_label(sim)};
      file.sessions = run_corpus(policy, point, corpus, make_factory(sim), opt);
      save_log_file(sim_out, file);
      err << "wrote " << file.sessions.size() << " sessions to " << sim_out << '\n';
      return kExitOk;
    }

    if (sweep->parsed()) {
      const auto policy = parse_policy(sw.policy);
      if (sw_chunks.empty()) sw_chunks = policy == PolicyKind::kLa ? "200..1000:200" : "800";
      SweepConfig cfg;
      cfg.policy = policy;
      cfg.corpus = load_corpus(sw);
      cfg.run = make_run_options(sw);
      const auto params = policy == PolicyKind::kLa ? parse_grid_ints(sw_n, "--n") : parse_grid_ints(sw_f, "--f");
      for (double c : parse_grid_values(sw_chunks)) {
        if (!(c > 0.0)) throw Error(Errc::kInvalidArgument, "--chunk-ms values must be positive");
        for (auto p : params) cfg.grid.push_back({c, p});
      }
      const auto points = run_sweep_detailed(cfg, make_factory(sw));
      std::vector<TradeoffRow> rows;
      for (const auto& p : points) rows.push_back(p.row);
      const std::vector<std::string> comment{"simulst sweep seed=" + std::to_string(sw.seed) +
                                             " clock=" + cfg.run.clock.describe_mode() + " cost=" + cost_label(sw) +
                                             " output=" + sw.output};
      with_output(sw_out, out, [&](std::ostream& os) { write_tradeoff(os, rows, comment); });
      if (!sw_logs_dir.empty()) {
        std::filesystem::create_directories(sw_logs_dir);
        for (const auto& p : points) {
          LogFile file;
          file.header = {std::string(policy_name(policy)), p.point.chunk_ms, static_cast<double>(p.point.param),
                         sw.seed, cfg.run.clock.describe_mode(), cost_label(sw)};
          file.sessions = p.logs;
          const auto name = std::string(policy_name(policy)) + "_chunk" + format_double(p.point.chunk_ms) + "_p" +
                            std::to_string(p.point.param) + ".jsonl";
          save_log_file((std::filesystem::path(sw_logs_dir) / name).string(), file);
        }
      }
      return kExitOk;
    }

    if (score->parsed()) {
      auto opt = make_run_options(sc);
      ScoreModes modes{sc_mode != "ca", sc_mode != "ideal"};
      std::vector<TradeoffRow> rows;
      std::vector<std::string> comment;
      for (const auto& path : sc_logs) {
        const auto file = load_log_file(path);
        rows.push_back(summarize_logs(file.header.policy, file.header.chunk_ms, file.header.param, file.sessions, opt,
                                      modes));
        comment.push_back("simulst score " + std::filesystem::path(path).filename().string() +
                          " seed=" + std::to_string(file.header.seed) + " clock=" + file.header.clock +
                          " cost=" + file.header.cost + " mode=" + sc_mode + " output=" + sc.output);
      }
      with_output(sc_out, out, [&](std::ostream& os) { write_tradeoff(os, rows, comment); });
      return kExitOk;
    }

    if (diagram->parsed()) {
      const auto file = load_log_file(dg_logs);
      const EmissionLog* log = nullptr;
      for (const auto& s : file.sessions)
        if (dg_id.empty() || s.id() == dg_id) {
          log = &s;
          break;
        }
      if (log == nullptr)
        throw Error(Errc::kInvalidArgument, dg_id.empty() ? "log file has no sessions" : "no session '" + dg_id + "'");
      const auto clock = dg_clock == "ideal" ? DelayMode::kIdeal : DelayMode::kComputationAware;
      SpeechOptions speech;
      speech.handoff.kind = parse_handoff(dg.handoff);
      speech.handoff.estimator_f = dg.estimator_f;
      const auto sched = speech_schedule(*log, clock, speech);
      const auto title = log->id() + " (" + file.header.policy + ", chunk " + format_double(file.header.chunk_ms) +
                         " ms, param " + format_double(file.header.param) + ", seed " +
                         std::to_string(file.header.seed) + ", handoff " + dg.handoff + ")";
      const auto d = render_timing_diagram(*log, sched, clock, title);
      auto j = d.to_json();
      j["seed"] = file.header.seed;
      with_output(dg_prefix + ".json", out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
      with_output(dg_prefix + ".txt", out, [&](std::ostream& os) { os << d.render_text(dg_width); });
      return kExitOk;
    }

    if (filter->parsed()) {
      const auto entries = load_manifest(fl_manifest);
      FilterConfig cfg{fl_ratio};
      std::vector<ManifestEntry> kept;
      for (const auto& e : entries)
        if (ratio_filter(e, cfg)) kept.push_back(e);
      with_output(fl_out, out, [&](std::ostream& os) {
        os << "# simulst filter max_ratio=" << format_double(fl_ratio) << '\n';
        write_manifest(os, kept);
      });
      err << "kept " << kept.size() << " of " << entries.size() << " entries\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_agent_failure(e.code()) ? kExitAgent : kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

inline int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args);
}

}  // namespace simulst::cli
