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

// Frozen-weight evaluation: exact-match scoring, generalization cells,
// run-level bootstrap intervals and error-mode labels.

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "analogy/decode.hpp"
#include "analogy/io.hpp"
#include "analogy/taskgen.hpp"

namespace analogy {

struct EvalResult {
  std::uint64_t task_id = 0;
  std::string split;
  TransformTag tag = TransformTag::kSuccessor;
  AlphabetSet alphabet_set = AlphabetSet::kSeen;
  LetterString predicted;
  LetterString target;
  bool correct = false;
  bool finished = false;
  bool malformed = false;
  std::optional<std::string> error_label;

  TransformSplit transform_split() const { return SplitOf(tag); }
};

// "Successor" -> "applied_successor", "RmRedSucc" -> "applied_rm_red_succ".
inline std::string AppliedLabel(TransformTag tag) {
  std::string out = "applied_";
  const std::string name = TransformName(tag);
  for (std::size_t i = 0; i < name.size(); ++i) {
    const char c = name[i];
    if (std::isupper(static_cast<unsigned char>(c)) && i > 0) out += '_';
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

inline constexpr const char* kOtherIncorrect = "other_incorrect";

// Tests an incorrect prediction against the answer every other transformation
// would give for the same query.
inline std::string ClassifyError(const AnalogyTask& task, const LetterString& prediction) {
  std::optional<TransformTag> match;
  int matches = 0;
  for (TransformTag tag : kAllTransforms) {
    if (tag == task.transformation.tag) continue;
    Transformation t{tag, task.transformation.shift_offset};
    try {
      if (OracleAnswer(t, task.alphabet, task.query) == prediction) {
        ++matches;
        match = tag;
      }
    } catch (const Error&) {
      // Not applicable to this query.
    }
  }
  return matches == 1 ? AppliedLabel(*match) : kOtherIncorrect;
}

// Scores every non-copy task. Results keep the suite order.
template <typename T>
std::vector<EvalResult> Evaluate(const ModelParams<T>& p, const std::vector<AnalogyTask>& suite,
                                 int chunk = 64) {
  std::vector<const AnalogyTask*> tasks;
  for (const AnalogyTask& t : suite) {
    if (!t.is_copy) tasks.push_back(&t);
  }
  std::vector<EvalResult> out;
  out.reserve(tasks.size());
  for (std::size_t s = 0; s < tasks.size(); s += chunk) {
    const std::size_t e = std::min(tasks.size(), s + chunk);
    std::vector<TokenSeq> enc;
    std::vector<int> bounds;
    for (std::size_t i = s; i < e; ++i) {
      enc.push_back(EncodeEncoder(tasks[i]->alphabet, tasks[i]->examples, tasks[i]->query));
      bounds.push_back(static_cast<int>(tasks[i]->target.size()) + kDecodeSlack);
    }
    const auto decoded = GreedyDecode(p, enc, bounds);
    for (std::size_t i = s; i < e; ++i) {
      const AnalogyTask& t = *tasks[i];
      const Decoded& d = decoded[i - s];
      EvalResult r;
      r.task_id = t.id;
      r.split = t.split;
      r.tag = t.transformation.tag;
      r.alphabet_set = t.alphabet_set;
      r.predicted = d.letters;
      r.target = t.target;
      r.finished = d.finished;
      r.malformed = d.malformed;
      r.correct = d.finished && !d.malformed && d.letters == t.target;
      if (!r.correct) r.error_label = ClassifyError(t, d.letters);
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline double Accuracy(const std::vector<EvalResult>& rs) {
  if (rs.empty()) return 0.0;
  std::size_t c = 0;
  for (const EvalResult& r : rs) c += r.correct;
  return static_cast<double>(c) / rs.size();
}

// ---------------------------------------------------------------------------
// Aggregation

enum class Grouping { kCell, kTransformation, kRun };

// "seen_alphabet/seen_transform", "new_alphabet/compositional", ...
inline std::string CellName(AlphabetSet a, TransformSplit t) {
  return std::string(AlphabetSetName(a)) + "_alphabet/" +
         (t == TransformSplit::kSeen ? "seen_transform" : SplitName(t));
}

struct AccuracyRow {
  std::string group;
  double mean = 0;           // mean over runs of the task-count-weighted accuracy
  double mean_equal = 0;     // mean over runs, transformations weighted equally
  std::optional<double> lo;  // bootstrap percentiles over runs
  std::optional<double> hi;
  std::size_t n_tasks = 0;   // summed over runs
  int n_runs = 0;
  std::vector<double> per_run;
};

struct BootstrapOptions {
  bool interval = true;
  int resamples = 10000;
  std::uint64_t seed = 20240601;
};

// Percentile bootstrap over run-level values.
inline std::pair<double, double> BootstrapInterval(const std::vector<double>& values,
                                                   int resamples, std::uint64_t seed) {
  if (values.size() < 2) {
    throw Error(ErrorCode::kInsufficientRuns, "bootstrap interval needs at least two runs");
  }
  std::mt19937_64 rng(seed);
  std::vector<double> means(resamples);
  const std::size_t n = values.size();
  for (int b = 0; b < resamples; ++b) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += values[UniformIndex(rng, n)];
    means[b] = s / n;
  }
  std::sort(means.begin(), means.end());
  auto pct = [&](double q) {
    // Linear interpolation between order statistics.
    const double pos = q * (resamples - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - i;
    return i + 1 < means.size() ? means[i] * (1 - f) + means[i + 1] * f : means[i];
  };
  return {pct(0.025), pct(0.975)};
}

namespace detail {

inline std::string GroupKey(const EvalResult& r, Grouping g, int run) {
  switch (g) {
    case Grouping::kCell: return CellName(r.alphabet_set, r.transform_split());
    case Grouping::kTransformation: return TransformName(r.tag);
    case Grouping::kRun: return "run_" + std::to_string(run);
  }
  return "";
}

// Task-weighted and transformation-equal-weighted accuracy of one group.
inline std::pair<double, double> GroupAccuracy(const std::vector<const EvalResult*>& rs) {
  std::map<TransformTag, std::pair<std::size_t, std::size_t>> by_tag;
  std::size_t correct = 0;
  for (const EvalResult* r : rs) {
    correct += r->correct;
    auto& [c, n] = by_tag[r->tag];
    c += r->correct;
    ++n;
  }
  double eq = 0;
  for (const auto& [tag, cn] : by_tag) eq += static_cast<double>(cn.first) / cn.second;
  if (rs.empty()) return {0.0, 0.0};
  return {static_cast<double>(correct) / rs.size(), eq / by_tag.size()};
}

}  // namespace detail

// `runs[i]` holds the results of replication i. Groups absent from a run are
// skipped for that run.
inline std::vector<AccuracyRow> Aggregate(const std::vector<std::vector<EvalResult>>& runs,
                                          Grouping grouping, const BootstrapOptions& opt = {}) {
  if (opt.interval && runs.size() < 2) {
    throw Error(ErrorCode::kInsufficientRuns,
                "confidence intervals requested with " + std::to_string(runs.size()) + " run(s)");
  }
  std::map<std::string, AccuracyRow> rows;
  std::map<std::string, std::vector<double>> equal_per_run;
  for (std::size_t ri = 0; ri < runs.size(); ++ri) {
    std::map<std::string, std::vector<const EvalResult*>> groups;
    for (const EvalResult& r : runs[ri]) {
      groups[detail::GroupKey(r, grouping, static_cast<int>(ri))].push_back(&r);
    }
    for (const auto& [key, members] : groups) {
      const auto [task_w, equal_w] = detail::GroupAccuracy(members);
      AccuracyRow& row = rows[key];
      row.group = key;
      row.per_run.push_back(task_w);
      row.n_tasks += members.size();
      ++row.n_runs;
      equal_per_run[key].push_back(equal_w);
    }
  }
  std::vector<AccuracyRow> out;
  for (auto& [key, row] : rows) {
    double s = 0, se = 0;
    for (double v : row.per_run) s += v;
    for (double v : equal_per_run[key]) se += v;
    row.mean = s / row.per_run.size();
    row.mean_equal = se / row.per_run.size();
    if (opt.interval && row.per_run.size() >= 2) {
      std::tie(row.lo, row.hi) = BootstrapInterval(row.per_run, opt.resamples, opt.seed);
    }
    out.push_back(row);
  }
  return out;
}

// Error-label histogram over incorrect results of one transformation.
inline std::map<std::string, int> ErrorBreakdown(const std::vector<EvalResult>& rs,
                                                 TransformTag tag) {
  std::map<std::string, int> out;
  for (const EvalResult& r : rs) {
    if (r.tag == tag && !r.correct) ++out[r.error_label.value_or(kOtherIncorrect)];
  }
  return out;
}

// Seen-transformation accuracy split by alphabet set, plus pooled new-transform cells.
struct CellTable {
  double seen_seen = 0, seen_new = 0;  // seen transforms: seen / new alphabets
  double new_seen = 0, new_new = 0;    // compositional + novel: seen / new alphabets
  std::size_t n_seen_seen = 0, n_seen_new = 0, n_new_seen = 0, n_new_new = 0;
};

inline CellTable CellAccuracies(const std::vector<EvalResult>& rs) {
  CellTable t;
  std::size_t c[4] = {0, 0, 0, 0};
  std::size_t n[4] = {0, 0, 0, 0};
  for (const EvalResult& r : rs) {
    const int k = (r.transform_split() == TransformSplit::kSeen ? 0 : 2) +
                  (r.alphabet_set == AlphabetSet::kNew ? 1 : 0);
    c[k] += r.correct;
    ++n[k];
  }
  auto acc = [&](int k) { return n[k] ? static_cast<double>(c[k]) / n[k] : 0.0; };
  t.seen_seen = acc(0);
  t.seen_new = acc(1);
  t.new_seen = acc(2);
  t.new_new = acc(3);
  t.n_seen_seen = n[0];
  t.n_seen_new = n[1];
  t.n_new_seen = n[2];
  t.n_new_new = n[3];
  return t;
}

// ---------------------------------------------------------------------------
// Reports

inline void WriteAccuracyCsv(std::ostream& out, const std::vector<AccuracyRow>& rows) {
  out << "group,accuracy_task_weighted,accuracy_equal_weighted,ci_lo,ci_hi,n_tasks,n_runs\n";
  for (const AccuracyRow& r : rows) {
    out << r.group << ',' << r.mean << ',' << r.mean_equal << ',';
    if (r.lo) out << *r.lo;
    out << ',';
    if (r.hi) out << *r.hi;
    out << ',' << r.n_tasks << ',' << r.n_runs << '\n';
  }
}

// Plot-ready long format: one line per (run, group).
inline void WriteLongCsv(std::ostream& out, const std::vector<AccuracyRow>& rows,
                         const std::string& label) {
  out << "label,group,run,accuracy\n";
  for (const AccuracyRow& r : rows) {
    for (std::size_t i = 0; i < r.per_run.size(); ++i) {
      out << label << ',' << r.group << ',' << i << ',' << r.per_run[i] << '\n';
    }
  }
}

inline OrderedJson EvalResultToJson(const EvalResult& r) {
  OrderedJson j;
  j["task_id"] = r.task_id;
  j["split"] = r.split;
  j["transformation"] = TransformName(r.tag);
  j["alphabet_set"] = AlphabetSetName(r.alphabet_set);
  j["transform_split"] = SplitName(r.transform_split());
  j["predicted"] = ToSpaced(r.predicted);
  j["target"] = ToSpaced(r.target);
  j["correct"] = r.correct;
  j["finished"] = r.finished;
  j["malformed"] = r.malformed;
  if (r.error_label) j["error_label"] = *r.error_label;
  return j;
}

inline OrderedJson EvalReportJson(const std::vector<EvalResult>& rs) {
  OrderedJson j;
  j["decode_bound"] = "target length + " + std::to_string(kDecodeSlack);
  j["n_tasks"] = rs.size();
  j["accuracy"] = Accuracy(rs);
  OrderedJson arr = OrderedJson::array();
  for (const EvalResult& r : rs) arr.push_back(EvalResultToJson(r));
  j["results"] = std::move(arr);
  return j;
}

}  // namespace analogy
