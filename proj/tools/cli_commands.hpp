// Copyright 2026 The Analogy Lab Authors.
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

#pragma once

// eval / interp / rasp / probe / report subcommands. Each writes a JSON
// snapshot of its resolved options into its output directory before doing
// any work.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "analogy/eval.hpp"
#include "analogy/interp.hpp"
#include "analogy/llmprobe.hpp"
#include "analogy/rasp.hpp"
#include "analogy/runs.hpp"
#include "analogy/svg.hpp"

namespace analogy::cli {

namespace fs = std::filesystem;

inline void WriteText(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

inline void Snapshot(const fs::path& dir, const std::string& name, const OrderedJson& j) {
  WriteText(dir / (name + "_config.json"), j.dump(2) + "\n");
}

inline std::vector<AnalogyTask> NonCopy(const std::vector<AnalogyTask>& tasks, std::size_t n) {
  std::vector<AnalogyTask> out;
  for (const AnalogyTask& t : tasks) {
    if (out.size() >= n) break;
    if (!t.is_copy) out.push_back(t);
  }
  return out;
}

inline std::vector<const AnalogyTask*> Ptrs(const std::vector<AnalogyTask>& v) {
  std::vector<const AnalogyTask*> out;
  for (const AnalogyTask& t : v) out.push_back(&t);
  return out;
}

inline std::vector<std::vector<double>> ToRows(const Mat<float>& m) {
  std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::vector<std::string> runs;
  std::string checkpoint = "final.ckpt";
  std::string out;
  int n = 1000;
  bool cells = false;
  bool no_interval = false;
};

inline void PrintCells(std::ostream& os, const CellTable& t) {
  os << std::fixed << std::setprecision(1);
  os << std::left << std::setw(18) << "" << std::setw(16) << "seen_alphabet" << "new_alphabet\n";
  os << std::setw(18) << "seen_transform" << std::setw(16) << 100 * t.seen_seen
     << 100 * t.seen_new << '\n';
  os << std::setw(18) << "new_transform" << std::setw(16) << 100 * t.new_seen << 100 * t.new_new
     << '\n';
  os.unsetf(std::ios::fixed);
}

inline int RunEval(const EvalArgs& a) {
  const fs::path out = a.out.empty() ? fs::path(a.runs.at(0)) / "reports" : fs::path(a.out);
  Snapshot(out, "eval", {{"runs", a.runs},
                         {"checkpoint", a.checkpoint},
                         {"n_per_suite", a.n},
                         {"cells", a.cells},
                         {"interval", !a.no_interval && a.runs.size() > 1}});
  std::vector<std::vector<EvalResult>> per_run;
  for (const std::string& dir : a.runs) {
    const OpenedRun run = OpenRun(dir, a.checkpoint);
    per_run.push_back(EvaluateRun(run, a.n));
    const auto& rs = per_run.back();
    std::ofstream res(out / (fs::path(dir).filename().string() + "_results.json"));
    res << EvalReportJson(rs).dump() << '\n';
    std::cerr << dir << ": " << rs.size() << " tasks, accuracy " << Accuracy(rs) << '\n';
  }
  BootstrapOptions opt;
  opt.interval = !a.no_interval && per_run.size() > 1;
  const auto cells = Aggregate(per_run, Grouping::kCell, opt);
  const auto tags = Aggregate(per_run, Grouping::kTransformation, opt);
  {
    std::ofstream f(out / "cells.csv");
    WriteAccuracyCsv(f, cells);
    std::ofstream g(out / "transformations.csv");
    WriteAccuracyCsv(g, tags);
    std::ofstream h(out / "transformations_long.csv");
    WriteLongCsv(h, tags, fs::path(a.runs[0]).filename().string());
  }
  // Error labels per transformation, pooled over runs.
  {
    std::ofstream f(out / "errors.csv");
    f << "transformation,label,count\n";
    std::vector<EvalResult> pooled;
    for (const auto& rs : per_run) pooled.insert(pooled.end(), rs.begin(), rs.end());
    for (TransformTag tag : kAllTransforms) {
      for (const auto& [label, count] : ErrorBreakdown(pooled, tag)) {
        f << TransformName(tag) << ',' << label << ',' << count << '\n';
      }
    }
  }
  std::vector<svg::Bar> bars;
  for (const AccuracyRow& r : tags) bars.push_back({r.group, r.mean, r.lo, r.hi});
  WriteText(out.parent_path() / "figures" / "transformations.svg",
            svg::BarChart(bars, "Accuracy by transformation", "accuracy"));

  if (a.cells) {
    for (std::size_t i = 0; i < per_run.size(); ++i) {
      std::cout << a.runs[i] << '\n';
      PrintCells(std::cout, CellAccuracies(per_run[i]));
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// interp

struct InterpArgs {
  std::string run;
  std::string checkpoint = "final.ckpt";
  std::string analysis;
  std::string component = "encoder_self";
  int layer = -1;
  int head = -1;
  int n = 200;
  std::uint64_t seed = 7;
};

inline int RunInterp(const InterpArgs& a) {
  const OpenedRun run = OpenRun(a.run, a.checkpoint);
  const fs::path out = fs::path(a.run) / "reports" / "interp";
  const fs::path fig = fs::path(a.run) / "figures";
  Snapshot(out, a.analysis, {{"run", a.run},
                             {"checkpoint", a.checkpoint},
                             {"analysis", a.analysis},
                             {"component", a.component},
                             {"layer", a.layer},
                             {"head", a.head},
                             {"n", a.n},
                             {"seed", a.seed},
                             {"params_checksum", HexChecksum(Checksum(run.params))}});
  const auto& p = run.params;
  const int L = p.config.n_layers;
  const std::vector<Alphabet> pool = BuildAlphabetPool(run.spec.dataset.alphabet_pool_size,
                                                       run.spec.dataset.seed);
  auto scan_tasks = [&] {
    return NonCopy(EvaluationSuites(run.spec.dataset, 4 * a.n, 0).splits.at(kSplitTest),
                   static_cast<std::size_t>(std::min(a.n, 100)));
  };

  if (a.analysis == "attention") {
    const interp::Component comp = interp::ParseComponent(a.component);
    const auto tasks = interp::BuildMappingProbe(Alphabet::Standard(), a.n, a.seed);
    const std::vector<std::string> labels = interp::TokenLabels(EncodeTask(tasks[0]).encoder);
    for (int l = 0; l < L; ++l) {
      if (a.layer >= 0 && l != a.layer) continue;
      const auto mean = interp::MeanAttention(p, Ptrs(tasks), comp, l);
      for (int h = 0; h < p.config.n_heads; ++h) {
        const std::string stem = std::string(interp::ComponentName(comp)) + "_L" + std::to_string(l) +
                                 "_H" + std::to_string(h);
        std::ostringstream csv;
        const bool enc_cols = comp != interp::Component::kDecoderSelf;
        interp::WriteMatrixCsv(csv, mean[h], enc_cols && comp == interp::Component::kEncoderSelf
                                                 ? labels
                                                 : std::vector<std::string>{});
        WriteText(out / (stem + ".csv"), csv.str());
        std::vector<std::string> rows = comp == interp::Component::kEncoderSelf ? labels
                                                                        : std::vector<std::string>{};
        WriteText(fig / (stem + ".svg"),
                  svg::Heatmap(ToRows(mean[h]), rows, enc_cols ? labels : rows, stem, 1.0));
      }
    }
    std::cout << "wrote mean attention for " << tasks.size() << " tasks to " << out << '\n';
  } else if (a.analysis == "heads") {
    const auto tasks = scan_tasks();
    const auto scores = interp::ScanMatchingHeads(p, Ptrs(tasks));
    std::ostringstream csv;
    csv << "layer,head,matching_score\n";
    for (const auto& s : scores) csv << s.layer << ',' << s.head << ',' << s.score << '\n';
    WriteText(out / "matching_heads.csv", csv.str());
    std::cout << "top matching head: layer " << scores[0].layer << " head " << scores[0].head
              << " score " << scores[0].score << '\n';
  } else if (a.analysis == "patch") {
    int layer = a.layer, head = a.head;
    if (layer < 0 || head < 0) {
      const auto tasks = scan_tasks();
      const auto top = interp::ScanMatchingHeads(p, Ptrs(tasks)).at(0);
      layer = top.layer;
      head = top.head;
    }
    const auto probe = interp::BuildPatchProbe(pool, a.n, a.seed);
    const auto rep = interp::FlipRate(p, layer, head, probe.donors, probe.targets);
    const auto identity = interp::FlipRate(p, layer, head, probe.targets, probe.targets);
    int identity_changed = 0;
    for (const auto& o : identity.outcomes) identity_changed += o.patched != o.baseline;
    std::ostringstream log;
    for (std::size_t i = 0; i < probe.targets.size(); ++i) {
      log << interp::PatchLogJson(probe.targets[i], probe.donors[i], layer, head,
                                  rep.outcomes[i])
                 .dump()
          << '\n';
    }
    WriteText(out / "patch_log.jsonl", log.str());
    const OrderedJson summary = {{"layer", layer},
                                 {"head", head},
                                 {"n", rep.n},
                                 {"flip_rate", rep.flip_rate()},
                                 {"baseline_accuracy", double(rep.baseline_correct) / rep.n},
                                 {"identity_changed", identity_changed}};
    WriteText(out / "patch_summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump() << '\n';
  } else if (a.analysis == "pca") {
    const auto tasks = NonCopy(EvaluationSuites(run.spec.dataset, 4 * a.n, 0).splits.at(kSplitTest),
                               a.n);
    const auto r = interp::RolePca(p, Ptrs(tasks));
    std::ostringstream csv;
    csv << "boundary,task,position,role,pc1,pc2\n";
    const std::vector<std::string> roles = {"alphabet", "example_in", "example_out", "query"};
    for (std::size_t k = 0; k < r.boundaries.size(); ++k) {
      std::vector<svg::Point> pts;
      for (const auto& pt : r.boundaries[k]) {
        csv << k << ',' << pt.task << ',' << pt.position << ',' << RoleName(pt.role) << ','
            << pt.x << ',' << pt.y << '\n';
        pts.push_back({pt.x, pt.y, static_cast<int>(pt.role)});
      }
      WriteText(fig / ("role_pca_boundary" + std::to_string(k) + ".svg"),
                svg::Scatter(pts, roles, "Residual boundary " + std::to_string(k)));
      std::cout << "boundary " << k << " separation " << r.separation[k] << '\n';
    }
    WriteText(out / "role_pca.csv", csv.str());
  } else if (a.analysis == "mapping") {
    const auto tasks = interp::BuildMappingProbe(Alphabet::Standard(), a.n, a.seed);
    const auto r = interp::MappingInvariance(p, Ptrs(tasks));
    std::ostringstream csv;
    interp::WriteMatrixCsv(csv, r.cosine);
    WriteText(out / "mapping_cosine.csv", csv.str());
    std::vector<std::vector<double>> rows(r.cosine.rows(), std::vector<double>(r.cosine.cols()));
    for (Eigen::Index i = 0; i < r.cosine.rows(); ++i) {
      for (Eigen::Index j = 0; j < r.cosine.cols(); ++j) rows[i][j] = std::max(0.0, r.cosine(i, j));
    }
    WriteText(fig / "mapping_cosine.svg", svg::Heatmap(rows, {}, {}, "Pairwise cosine", 1.0));
    std::cout << "mean pairwise cosine " << r.mean_offdiag << " min " << r.min_offdiag << '\n';
  } else if (a.analysis == "elimination") {
    const auto tasks = interp::BuildMappingProbe(Alphabet::Standard(), 1, a.seed);
    const auto rows = interp::EliminationScores(p, tasks[0], a.layer);
    std::ostringstream csv;
    csv << "position,token,role,terminator_attention,norm_ratio\n";
    std::vector<double> att, ratio;
    for (const auto& r : rows) {
      csv << r.position << ',' << EncoderTokenName(r.token) << ',' << RoleName(r.role) << ','
          << r.terminator_attention << ',' << r.norm_ratio << '\n';
      att.push_back(r.terminator_attention);
      ratio.push_back(r.norm_ratio);
    }
    WriteText(out / "elimination.csv", csv.str());
    std::cout << "spearman(terminator attention, norm ratio) " << interp::Spearman(att, ratio)
              << '\n';
  } else {
    throw Error(ErrorCode::kInvalidConfig, "unknown analysis '" + a.analysis + "'");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// rasp

struct RaspArgs {
  std::string program;
  std::string input;
  std::string dump;
  int alphabets = 25;
};

inline std::string FormatOutput(const rasp::SeqVal& v) {
  std::string out;
  for (double x : v) {
    const long c = std::lround(x);
    if (c == 0) continue;
    if (!out.empty()) out += ' ';
    if (c >= 'a' && c <= 'z') out += static_cast<char>(c);
    else out += std::to_string(c);
  }
  return out;
}

inline void DumpSelectors(const rasp::Trace& tr, const std::string& input, const fs::path& dir) {
  std::vector<std::string> labels;
  for (char c : input) labels.emplace_back(1, c);
  for (const auto& s : tr.selectors) {
    const std::string stem = "L" + std::to_string(s.layer) + "_" + s.name;
    std::ostringstream csv;
    rasp::WriteSelectorCsv(csv, s.matrix, input);
    WriteText(dir / (stem + ".csv"), csv.str());
    std::vector<std::vector<double>> m(s.matrix.rows, std::vector<double>(s.matrix.cols));
    for (int i = 0; i < s.matrix.rows; ++i) {
      for (int j = 0; j < s.matrix.cols; ++j) m[i][j] = s.matrix.at(i, j);
    }
    WriteText(dir / (stem + ".svg"), svg::Heatmap(m, labels, labels, s.name, 1.0));
  }
}

inline int RunRasp(const RaspArgs& a) {
  if (!a.dump.empty()) {
    Snapshot(a.dump, "rasp", {{"program", a.program}, {"input", a.input}});
  }
  if (a.program == "predecessor") {
    const rasp::ProgramResult r = rasp::RunPredecessorProgram(a.input);
    std::cout << ToSpaced(ParseLetters(r.answer)) << '\n';
    if (!a.dump.empty()) DumpSelectors(r.trace, a.input, a.dump);
    return 0;
  }
  std::ifstream in(a.program);
  if (!in) throw Error(ErrorCode::kIo, "cannot read program " + a.program);
  std::stringstream text;
  text << in.rdbuf();
  const rasp::Program prog = rasp::ParseProgram(text.str(), fs::path(a.program).stem().string());
  const rasp::Trace tr = rasp::RunProgram(prog, a.input);
  std::cout << FormatOutput(tr.output) << '\n';
  if (!a.dump.empty()) DumpSelectors(tr, a.input, a.dump);
  return 0;
}

// Exhaustive agreement of the predecessor program with the transformation
// oracle; non-zero exit on any disagreement.
inline int RunRaspVerify(const RaspArgs& a) {
  const auto pool = BuildAlphabetPool(std::max(5, (a.alphabets + 4) / 5 * 5), 1);
  const rasp::OracleCheck r = rasp::CheckPredecessorAgainstOracle(
      std::vector<Alphabet>(pool.begin(), pool.begin() + std::min<std::size_t>(a.alphabets, pool.size())));
  for (const std::string& s : r.first_mismatches) std::cerr << "mismatch: " << s << '\n';
  std::cout << r.checked << " instances, " << r.mismatched << " mismatches\n";
  return r.mismatched == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// probe

struct ProbeArgs {
  std::string config;
  std::string out = "probe";
  std::string local_run;
  std::string checkpoint = "final.ckpt";
  std::uint64_t data_seed = 1;
  int n = 200;
};

inline int RunProbeCmd(const ProbeArgs& a) {
  const probe::ProbeConfig c =
      a.config.empty() ? probe::ProbeConfig{} : probe::ProbeConfigFromJson(ReadJsonFile(a.config));
  Snapshot(a.out, "probe", {{"probe", probe::ProbeConfigToJson(c)},
                            {"prompt_version", probe::kPromptVersion},
                            {"data_seed", a.data_seed},
                            {"n_per_suite", a.n},
                            {"local_run", a.local_run}});
  DatasetConfig dc;
  dc.seed = a.data_seed;
  if (!a.local_run.empty()) dc = ReadRunSpec(a.local_run).dataset;
  const Dataset ds = EvaluationSuites(dc, a.n, a.n);
  std::vector<AnalogyTask> suite;
  for (const char* s : {kSplitTest, kSuiteNewAlphabet, kSuiteNewTransform, kSuiteNewBoth}) {
    for (const AnalogyTask& t : NonCopy(ds.splits.at(s), a.n)) suite.push_back(t);
  }
  const probe::ProbeRun run =
      probe::RunProbe(c, suite, (fs::path(a.out) / "responses.jsonl").string());
  BootstrapOptions no_ci;
  no_ci.interval = false;
  std::vector<std::pair<std::string, std::vector<AccuracyRow>>> joined;
  joined.emplace_back(c.model, Aggregate({run.eval}, Grouping::kCell, no_ci));
  if (!a.local_run.empty()) {
    const OpenedRun local = OpenRun(a.local_run, a.checkpoint);
    const auto rs = Evaluate(local.params, suite);
    joined.emplace_back(fs::path(a.local_run).filename().string(),
                        Aggregate({rs}, Grouping::kCell, no_ci));
  }
  std::ofstream f(fs::path(a.out) / "joined.csv");
  probe::WriteJoinedCsv(f, joined);
  std::cout << run.results.size() << "/" << suite.size() << " tasks answered, accuracy "
            << Accuracy(run.eval) << ", parse failures " << run.parse_failure_rate() << '\n';
  if (run.aborted) {
    std::cerr << "probe stopped early: " << run.abort_reason << '\n';
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string figure;
  std::vector<std::string> runs;
  std::string out = "report";
  int n = 1000;
};

inline int RunReport(const ReportArgs& a) {
  Snapshot(a.out, "report_" + a.figure, {{"figure", a.figure}, {"runs", a.runs}, {"n", a.n}});
  const fs::path out = a.out;
  if (a.figure == "curves") {
    std::ostringstream csv;
    csv << "run,epoch,lr,train_loss,val_accuracy,wall_time\n";
    std::vector<svg::Series> acc;
    for (const std::string& r : a.runs) {
      svg::Series s;
      s.name = fs::path(r).filename().string();
      for (const EpochMetrics& m : ReadMetrics(r)) {
        csv << s.name << ',' << m.epoch << ',' << m.lr << ',' << m.train_loss << ','
            << m.val_accuracy << ',' << m.wall_time << '\n';
        s.x.push_back(m.epoch);
        s.y.push_back(m.val_accuracy);
      }
      acc.push_back(std::move(s));
    }
    WriteText(out / "curves.csv", csv.str());
    WriteText(out / "curves.svg",
              svg::LineChart(acc, "Validation accuracy", "epoch", "accuracy"));
    return 0;
  }
  if (a.figure != "alphabets" && a.figure != "cells") {
    throw Error(ErrorCode::kInvalidConfig, "unknown figure '" + a.figure + "'");
  }
  // Group runs by alphabet pool size (alphabets) or by run name (cells).
  std::map<int, std::vector<CellTable>> by_size;
  std::ostringstream cells_csv;
  cells_csv << "run,alphabets,copy,n_examples,seen_seen,seen_new,new_seen,new_new\n";
  for (const std::string& r : a.runs) {
    const OpenedRun run = OpenRun(r);
    const CellTable t = CellAccuracies(EvaluateRun(run, a.n));
    const auto& d = run.spec.dataset;
    cells_csv << fs::path(r).filename().string() << ',' << d.alphabet_pool_size << ','
              << (d.include_copy ? 1 : 0) << ',' << d.n_examples << ',' << t.seen_seen << ','
              << t.seen_new << ',' << t.new_seen << ',' << t.new_new << '\n';
    by_size[d.alphabet_pool_size].push_back(t);
    std::cout << r << '\n';
    PrintCells(std::cout, t);
  }
  WriteText(out / "cells.csv", cells_csv.str());
  if (a.figure == "cells") return 0;

  std::ostringstream csv;
  csv << "alphabets,seen_alphabet,new_alphabet,gap,seen_lo,seen_hi,new_lo,new_hi,n_runs\n";
  svg::Series seen{"seen alphabets", {}, {}, {}, {}}, fresh{"new alphabets", {}, {}, {}, {}};
  for (const auto& [size, tables] : by_size) {
    std::vector<double> s, n;
    for (const CellTable& t : tables) {
      s.push_back(t.seen_seen);
      n.push_back(t.seen_new);
    }
    const double ms = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
    const double mn = std::accumulate(n.begin(), n.end(), 0.0) / n.size();
    std::pair<double, double> cs{ms, ms}, cn{mn, mn};
    if (s.size() >= 2) {
      cs = BootstrapInterval(s, 10000, 1);
      cn = BootstrapInterval(n, 10000, 1);
    }
    csv << size << ',' << ms << ',' << mn << ',' << ms - mn << ',' << cs.first << ','
        << cs.second << ',' << cn.first << ',' << cn.second << ',' << s.size() << '\n';
    seen.x.push_back(size);
    seen.y.push_back(ms);
    seen.lo.push_back(cs.first);
    seen.hi.push_back(cs.second);
    fresh.x.push_back(size);
    fresh.y.push_back(mn);
    fresh.lo.push_back(cn.first);
    fresh.hi.push_back(cn.second);
  }
  WriteText(out / "alphabets.csv", csv.str());
  WriteText(out / "alphabets.svg", svg::LineChart({seen, fresh}, "Seen transformations",
                                                  "training alphabets", "accuracy"));
  return 0;
}

}  // namespace analogy::cli

inline void RegisterCommands(CLI::App& app) {
  using namespace analogy::cli;
  // Option storage lives for the whole process.
  static EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate run checkpoints on the held-out suites");
  eval->add_option("--run-dir", ev.runs, "Run directory (repeat for replications)")->required();
  eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint file name or path");
  eval->add_option("--out", ev.out, "Report directory (default <run>/reports)");
  eval->add_option("--n", ev.n, "Tasks drawn per suite");
  eval->add_flag("--cells", ev.cells, "Print the seen/new alphabet x transformation table");
  eval->add_flag("--no-interval", ev.no_interval, "Skip bootstrap intervals");
  eval->callback([] { std::exit(RunEval(ev)); });

  static InterpArgs ip;
  auto* in = app.add_subcommand("interp", "Interpretability analyses on a checkpoint");
  in->add_option("analysis", ip.analysis, "attention | heads | patch | pca | mapping | elimination")
      ->required();
  in->add_option("--run-dir", ip.run, "Run directory")->required();
  in->add_option("--checkpoint", ip.checkpoint, "Checkpoint file name or path");
  in->add_option("--component", ip.component, "encoder_self | decoder_self | decoder_cross");
  in->add_option("--layer", ip.layer, "Layer (default: all, or top matching head for patch)");
  in->add_option("--head", ip.head, "Head for patch");
  in->add_option("--n", ip.n, "Probe size");
  in->add_option("--seed", ip.seed, "Probe seed");
  in->callback([] { std::exit(RunInterp(ip)); });

  static RaspArgs rp;
  auto* ra = app.add_subcommand("rasp", "Symbolic attention programs");
  ra->require_subcommand(1);
  auto* run = ra->add_subcommand("run", "Run a program on an input string");
  run->add_option("program", rp.program, "'predecessor' or a program file")->required();
  run->add_option("--input", rp.input, "Input, e.g. abcdefghij|ghi>fhi|bcd")->required();
  run->add_option("--dump", rp.dump, "Directory for selector CSV/SVG dumps");
  run->callback([] { std::exit(RunRasp(rp)); });
  auto* verify = ra->add_subcommand("verify", "Check the predecessor program against the oracle");
  verify->add_option("--alphabets", rp.alphabets, "Number of probe alphabets");
  verify->callback([] { std::exit(RunRaspVerify(rp)); });

  static ProbeArgs pb;
  auto* pr = app.add_subcommand("probe", "Query a chat-completions endpoint on the suites");
  pr->add_option("--config", pb.config, "Probe config JSON");
  pr->add_option("--out", pb.out, "Output directory");
  pr->add_option("--local-run", pb.local_run, "Run directory to score on the same tasks");
  pr->add_option("--checkpoint", pb.checkpoint, "Checkpoint of the local run");
  pr->add_option("--data-seed", pb.data_seed, "Dataset seed when no local run is given");
  pr->add_option("--n", pb.n, "Tasks per suite");
  pr->callback([] { std::exit(RunProbeCmd(pb)); });

  static ReportArgs rep;
  auto* re = app.add_subcommand("report", "Figure data (CSV + SVG) across runs");
  re->add_option("--figure", rep.figure, "alphabets | cells | curves")->required();
  re->add_option("--runs", rep.runs, "Run directories")->required();
  re->add_option("--out", rep.out, "Output directory");
  re->add_option("--n", rep.n, "Tasks per suite");
  re->callback([] { std::exit(RunReport(rep)); });
}
