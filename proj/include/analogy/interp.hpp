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

// Interpretability probes over a trained model: mean attention, attention
// pattern patching, head scans, role PCA, mapping invariance and the
// elimination analysis.
//
// Layers and heads are zero-based. Residual boundary b is the stream entering
// encoder layer b (boundary 0 holds the embeddings).

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "analogy/decode.hpp"
#include "analogy/io.hpp"
#include "analogy/model.hpp"
#include "analogy/rasp.hpp"
#include "analogy/taskgen.hpp"
#include "analogy/tokenizer.hpp"

namespace analogy::interp {

enum class Component { kEncoderSelf, kDecoderSelf, kDecoderCross };

inline const char* ComponentName(Component c) {
  switch (c) {
    case Component::kEncoderSelf: return "encoder_self";
    case Component::kDecoderSelf: return "decoder_self";
    case Component::kDecoderCross: return "decoder_cross";
  }
  return "?";
}

inline Component ParseComponent(const std::string& s) {
  if (s == "encoder_self" || s == "encoder") return Component::kEncoderSelf;
  if (s == "decoder_self") return Component::kDecoderSelf;
  if (s == "decoder_cross") return Component::kDecoderCross;
  throw Error(ErrorCode::kInvalidConfig, "unknown component '" + s + "'");
}

template <typename T>
struct TaskTrace {
  ActivationTrace<T> trace;
  std::vector<TokenSeq> enc;
  std::vector<TokenSeq> dec;
};

// Eval-mode forward with teacher forcing on the targets, capturing
// attention and residual snapshots.
template <typename T>
TaskTrace<T> CaptureTrace(const ModelParams<T>& p, const std::vector<const AnalogyTask*>& tasks) {
  TaskTrace<T> t;
  for (const AnalogyTask* task : tasks) {
    const EncodedTask e = EncodeTask(*task);
    t.enc.push_back(e.encoder);
    t.dec.push_back(e.decoder_input);
  }
  ForwardOptions<T> opt;
  opt.mode = Mode::kEval;
  opt.capture = true;
  const EncoderState<T> enc = EncoderForward(p, t.enc, opt, &t.trace);
  DecoderForward(p, enc, t.dec, opt, &t.trace);
  return t;
}

// Element-wise mean of each head's attention over a group of tasks that
// share serialization geometry.
template <typename T>
std::vector<Mat<T>> MeanAttention(const ModelParams<T>& p,
                                  const std::vector<const AnalogyTask*>& tasks, Component comp,
                                  int layer) {
  if (tasks.empty()) throw Error(ErrorCode::kGeometryMismatch, "empty task group");
  if (layer < 0 || layer >= p.config.n_layers) {
    throw Error(ErrorCode::kInvalidConfig, "layer " + std::to_string(layer) + " out of range");
  }
  const EncodedTask first = EncodeTask(*tasks[0]);
  for (const AnalogyTask* t : tasks) {
    const EncodedTask e = EncodeTask(*t);
    const bool enc_ok = e.encoder.size() == first.encoder.size();
    const bool dec_ok = e.decoder_input.size() == first.decoder_input.size();
    if (!enc_ok || (comp != Component::kEncoderSelf && !dec_ok)) {
      throw Error(ErrorCode::kGeometryMismatch, "tasks differ in sequence length");
    }
  }
  const TaskTrace<T> tt = CaptureTrace(p, tasks);
  const auto& per_layer = comp == Component::kEncoderSelf   ? tt.trace.enc_self
                          : comp == Component::kDecoderSelf ? tt.trace.dec_self
                                                            : tt.trace.dec_cross;
  const auto& seqs = per_layer.at(layer);
  std::vector<Mat<T>> mean(p.config.n_heads);
  for (int h = 0; h < p.config.n_heads; ++h) {
    mean[h] = Mat<T>::Zero(seqs[0][h].rows(), seqs[0][h].cols());
    for (const auto& s : seqs) mean[h] += s[h];
    mean[h] /= static_cast<T>(seqs.size());
  }
  return mean;
}

// ---------------------------------------------------------------------------
// Patching

struct PatchSpec {
  int layer = 1;
  int head = 0;
  const AnalogyTask* donor = nullptr;
  const AnalogyTask* target = nullptr;
};

struct PatchOutcome {
  LetterString baseline;
  LetterString patched;
};

// Batched patching: each target's encoder runs with head (layer, head)
// replaced by the matching donor's attention matrix. All other heads and the
// value path are untouched.
template <typename T>
std::vector<PatchOutcome> PatchAttentionBatch(const ModelParams<T>& p, int layer, int head,
                                              const std::vector<const AnalogyTask*>& donors,
                                              const std::vector<const AnalogyTask*>& targets) {
  if (donors.size() != targets.size()) {
    throw Error(ErrorCode::kGeometryMismatch, "one donor per target required");
  }
  if (layer < 0 || layer >= p.config.n_layers || head < 0 || head >= p.config.n_heads) {
    throw Error(ErrorCode::kInvalidConfig, "patch site out of range");
  }
  std::vector<TokenSeq> denc, tenc;
  std::vector<int> bounds;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    denc.push_back(EncodeEncoder(donors[i]->alphabet, donors[i]->examples, donors[i]->query));
    tenc.push_back(EncodeEncoder(targets[i]->alphabet, targets[i]->examples, targets[i]->query));
    if (denc.back().size() != tenc.back().size()) {
      throw Error(ErrorCode::kGeometryMismatch, "donor and target encoder lengths differ");
    }
    bounds.push_back(static_cast<int>(std::max(targets[i]->target.size(),
                                               donors[i]->target.size())) +
                     kDecodeSlack);
  }
  ForwardOptions<T> opt;
  opt.mode = Mode::kEval;
  opt.capture = true;
  ActivationTrace<T> trace;
  EncoderForward(p, denc, opt, &trace);
  AttentionPatch<T> patch;
  patch.layer = layer;
  patch.head = head;
  for (std::size_t i = 0; i < denc.size(); ++i) patch.matrices.push_back(trace.enc_self[layer][i][head]);

  const auto base = GreedyDecode(p, tenc, bounds);
  const auto patched = GreedyDecode(p, tenc, bounds, &patch);
  std::vector<PatchOutcome> out(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    out[i].baseline = base[i].letters;
    out[i].patched = patched[i].letters;
  }
  return out;
}

template <typename T>
PatchOutcome PatchAttention(const ModelParams<T>& p, const PatchSpec& spec) {
  return PatchAttentionBatch(p, spec.layer, spec.head, {spec.donor}, {spec.target}).at(0);
}

// The same task with its example output replaced by the successor answer.
// Empty when successor does not apply to the example or the query.
inline std::optional<AnalogyTask> SuccessorDonor(const AnalogyTask& task) {
  const Transformation succ{TransformTag::kSuccessor, 3};
  try {
    AnalogyTask d = task;
    for (ExamplePair& ex : d.examples) ex.output = OracleAnswer(succ, d.alphabet, ex.input);
    d.target = OracleAnswer(succ, d.alphabet, d.query);
    d.transformation = succ;
    return d;
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Predecessor tasks on `alphabets` whose example and query also admit a
// successor answer, paired with their successor donors.
struct PatchProbe {
  std::vector<AnalogyTask> targets;
  std::vector<AnalogyTask> donors;
};

inline PatchProbe BuildPatchProbe(const std::vector<Alphabet>& alphabets, int count,
                                  std::uint64_t seed, int n_examples = 1) {
  PatchProbe probe;
  std::mt19937_64 rng(seed);
  const Transformation pred{TransformTag::kPredecessor, 3};
  int attempts = 0;
  while (static_cast<int>(probe.targets.size()) < count) {
    if (++attempts > count * 100) {
      throw Error(ErrorCode::kExhaustedSampling, "could not build the patch probe");
    }
    const Alphabet& a = alphabets[UniformIndex(rng, alphabets.size())];
    AnalogyTask t;
    try {
      t = BuildTask(pred, a, rng, n_examples, false);
    } catch (const Error&) {
      continue;
    }
    auto d = SuccessorDonor(t);
    if (!d) continue;
    t.id = probe.targets.size();
    d->id = t.id;
    probe.targets.push_back(std::move(t));
    probe.donors.push_back(std::move(*d));
  }
  return probe;
}

struct FlipReport {
  int layer = 0, head = 0;
  int n = 0;
  int flipped = 0;           // patched prediction equals the donor-rule answer
  int baseline_correct = 0;  // unpatched prediction equals the target
  int flipped_of_correct = 0;
  std::vector<PatchOutcome> outcomes;

  double flip_rate() const { return n ? static_cast<double>(flipped) / n : 0.0; }
};

template <typename T>
FlipReport FlipRate(const ModelParams<T>& p, int layer, int head,
                    const std::vector<AnalogyTask>& donors,
                    const std::vector<AnalogyTask>& targets, int chunk = 50) {
  FlipReport r;
  r.layer = layer;
  r.head = head;
  for (std::size_t s = 0; s < targets.size(); s += chunk) {
    const std::size_t e = std::min(targets.size(), s + chunk);
    std::vector<const AnalogyTask*> d, t;
    for (std::size_t i = s; i < e; ++i) {
      d.push_back(&donors[i]);
      t.push_back(&targets[i]);
    }
    auto out = PatchAttentionBatch(p, layer, head, d, t);
    for (std::size_t i = s; i < e; ++i) {
      const PatchOutcome& o = out[i - s];
      const bool flip = o.patched == donors[i].target;
      const bool ok = o.baseline == targets[i].target;
      r.flipped += flip;
      r.baseline_correct += ok;
      r.flipped_of_correct += flip && ok;
      ++r.n;
      r.outcomes.push_back(o);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Head scan

// Same-letter selector over an encoder stream, excluding each position's
// match with itself.
inline rasp::SelectorMatrix MatchingSelector(const TokenSeq& enc) {
  rasp::SeqVal v(enc.begin(), enc.end());
  rasp::SelectorMatrix s = rasp::Select(v, v, rasp::Predicate::kEquals, false);
  for (int i = 0; i < s.rows; ++i) {
    for (int j = 0; j < s.cols; ++j) {
      if (i == j || !IsLetterToken(enc[i])) s.set(i, j, false);
    }
  }
  return s;
}

struct HeadScore {
  int layer = 0, head = 0;
  double score = 0;
};

// Ranks every encoder head by its mean agreement with the matching selector.
template <typename T>
std::vector<HeadScore> ScanMatchingHeads(const ModelParams<T>& p,
                                         const std::vector<const AnalogyTask*>& tasks) {
  const TaskTrace<T> tt = CaptureTrace(p, tasks);
  std::vector<HeadScore> out;
  for (int l = 0; l < p.config.n_layers; ++l) {
    for (int h = 0; h < p.config.n_heads; ++h) {
      double s = 0;
      for (std::size_t b = 0; b < tasks.size(); ++b) {
        s += rasp::CompareSelectorToHead(MatchingSelector(tt.enc[b]), tt.trace.enc_self[l][b][h]);
      }
      out.push_back({l, h, tasks.empty() ? 0.0 : s / tasks.size()});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const HeadScore& a, const HeadScore& b) { return a.score > b.score; });
  return out;
}

// ---------------------------------------------------------------------------
// Role PCA

inline bool IsLetterRole(Role r) {
  return r == Role::kAlphabet || r == Role::kExampleIn || r == Role::kExampleOut ||
         r == Role::kQuery;
}

struct ProjectedPoint {
  double x = 0, y = 0;
  Role role = Role::kAlphabet;
  int task = 0;
  int position = 0;
};

struct RolePcaResult {
  Eigen::MatrixXd components;  // 2 x d, rows are unit principal axes
  Eigen::RowVectorXd mean;
  Eigen::Vector2d explained;   // variance along each component
  std::vector<std::vector<ProjectedPoint>> boundaries;  // per residual boundary
  std::vector<double> separation;                       // silhouette per boundary
};

// Mean silhouette of 2D points under the given labels.
inline double Silhouette(const std::vector<ProjectedPoint>& pts) {
  std::vector<int> labels;
  for (const auto& p : pts) labels.push_back(static_cast<int>(p.role));
  std::vector<int> uniq = labels;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() < 2) return 0.0;
  const std::size_t n = pts.size();
  std::vector<int> cls(n);
  std::vector<int> count(uniq.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    cls[i] = static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), labels[i]) - uniq.begin());
    ++count[cls[i]];
  }
  double total = 0;
  std::vector<double> sum(uniq.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      sum[cls[j]] += std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
    }
    if (count[cls[i]] < 2) continue;  // silhouette of a singleton is 0
    const double a = sum[cls[i]] / (count[cls[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < uniq.size(); ++k) {
      if (static_cast<int>(k) != cls[i] && count[k] > 0) b = std::min(b, sum[k] / count[k]);
    }
    const double m = std::max(a, b);
    total += m > 0 ? (b - a) / m : 0.0;
  }
  return total / n;
}

// Fits a 2-component PCA on letter-token residuals pooled over every encoder
// boundary, then projects each boundary separately. Each axis is signed so
// that its largest-magnitude coordinate is positive.
template <typename T>
RolePcaResult RolePca(const ModelParams<T>& p, const std::vector<const AnalogyTask*>& tasks) {
  const TaskTrace<T> tt = CaptureTrace(p, tasks);
  const auto& layout = tt.trace.enc_layout;
  std::vector<std::vector<Role>> roles;
  for (const TokenSeq& e : tt.enc) roles.push_back(EncoderRoles(e));

  std::vector<int> rows;  // packed row indices of letter tokens
  for (int b = 0; b < layout.size(); ++b) {
    for (int i = 0; i < layout.lengths[b]; ++i) {
      if (IsLetterRole(roles[b][i])) rows.push_back(layout.offsets[b] + i);
    }
  }
  const int nb = static_cast<int>(tt.trace.enc_residual.size());
  const int d = p.config.embed_dim;
  Eigen::MatrixXd pooled(static_cast<Eigen::Index>(rows.size()) * nb, d);
  for (int k = 0; k < nb; ++k) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      pooled.row(k * rows.size() + r) = tt.trace.enc_residual[k].row(rows[r]).template cast<double>();
    }
  }
  RolePcaResult res;
  res.mean = pooled.colwise().mean();
  const Eigen::MatrixXd centered = pooled.rowwise() - res.mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / std::max<Eigen::Index>(1, pooled.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd vals = eig.eigenvalues();  // ascending
  const double top = vals(d - 1), second = vals(d - 2);
  if (!(top > 1e-10) || !(second > 1e-10 * std::max(1.0, top))) {
    throw Error(ErrorCode::kDegenerateCovariance, "residual variance collapsed");
  }
  res.components.resize(2, d);
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - c);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    res.components.row(c) = v.transpose();
  }
  res.explained << top, second;

  for (int k = 0; k < nb; ++k) {
    std::vector<ProjectedPoint> pts;
    for (int b = 0; b < layout.size(); ++b) {
      for (int i = 0; i < layout.lengths[b]; ++i) {
        if (!IsLetterRole(roles[b][i])) continue;
        const Eigen::RowVectorXd x =
            tt.trace.enc_residual[k].row(layout.offsets[b] + i).template cast<double>() - res.mean;
        const Eigen::Vector2d z = res.components * x.transpose();
        pts.push_back({z(0), z(1), roles[b][i], b, i});
      }
    }
    res.separation.push_back(Silhouette(pts));
    res.boundaries.push_back(std::move(pts));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Mapping invariance

// Predecessor tasks on one alphabet with fixed example and query lengths, so
// every task shares positions; the example letters vary.
inline std::vector<AnalogyTask> BuildMappingProbe(const Alphabet& a, int count, std::uint64_t seed,
                                                  int length = 3) {
  std::mt19937_64 rng(seed);
  std::vector<AnalogyTask> out;
  const Transformation pred{TransformTag::kPredecessor, 3};
  const int max_start = kAlphabetSize - length;  // starts 1..max_start admit a predecessor
  while (static_cast<int>(out.size()) < count) {
    const int s1 = 1 + static_cast<int>(UniformIndex(rng, max_start));
    int s2 = 1 + static_cast<int>(UniformIndex(rng, max_start));
    if (s2 == s1) s2 = 1 + (s2 % max_start);
    AnalogyTask t;
    t.alphabet = a;
    t.transformation = pred;
    const LetterString in = detail::RunOf(a, s1, length);
    t.examples.push_back({in, OracleAnswer(pred, a, in)});
    t.query = detail::RunOf(a, s2, length);
    t.target = OracleAnswer(pred, a, t.query);
    t.id = out.size();
    t.split = "mapping_probe";
    out.push_back(std::move(t));
  }
  return out;
}

struct CosineReport {
  Eigen::MatrixXd cosine;
  double mean_offdiag = 0;
  double min_offdiag = 0;
};

// Pairwise cosines of the residual after the last encoder layer at the first
// example-output token.
template <typename T>
CosineReport MappingInvariance(const ModelParams<T>& p,
                               const std::vector<const AnalogyTask*>& tasks) {
  const TaskTrace<T> tt = CaptureTrace(p, tasks);
  const int n = static_cast<int>(tasks.size());
  const Mat<T>& resid = tt.trace.enc_residual.back();
  Eigen::MatrixXd reps(n, p.config.embed_dim);
  for (int b = 0; b < n; ++b) {
    const std::vector<Role> roles = EncoderRoles(tt.enc[b]);
    const auto it = std::find(roles.begin(), roles.end(), Role::kExampleOut);
    if (it == roles.end()) throw Error(ErrorCode::kGeometryMismatch, "task has no example output");
    const int pos = static_cast<int>(it - roles.begin());
    reps.row(b) = resid.row(tt.trace.enc_layout.offsets[b] + pos).template cast<double>();
    reps.row(b).normalize();
  }
  CosineReport r;
  r.cosine = reps * reps.transpose();
  double s = 0, mn = 1;
  int c = 0;
  for (int i = 0; i < n; ++i) {
    r.cosine(i, i) = 1.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      s += r.cosine(i, j);
      mn = std::min(mn, r.cosine(i, j));
      ++c;
    }
  }
  r.mean_offdiag = c ? s / c : 1.0;
  r.min_offdiag = c ? mn : 1.0;
  return r;
}

// ---------------------------------------------------------------------------
// Elimination

struct EliminationRow {
  int position = 0;
  TokenId token = 0;
  Role role = Role::kAlphabet;
  double terminator_attention = 0;  // mean over heads
  double norm_ratio = 0;            // |residual out| / |residual in| at the layer
};

// The terminator is the final encoder token (the trailing arrow), which is
// excluded from the rows.
template <typename T>
std::vector<EliminationRow> EliminationScores(const ModelParams<T>& p, const AnalogyTask& task,
                                              int layer = -1) {
  if (layer < 0) layer = p.config.n_layers - 1;
  const TaskTrace<T> tt = CaptureTrace<T>(p, {&task});
  const int n = tt.trace.enc_layout.lengths[0];
  const int term = n - 1;
  const std::vector<Role> roles = EncoderRoles(tt.enc[0]);
  std::vector<EliminationRow> out;
  for (int i = 0; i < term; ++i) {
    EliminationRow r;
    r.position = i;
    r.token = tt.enc[0][i];
    r.role = roles[i];
    for (int h = 0; h < p.config.n_heads; ++h) {
      r.terminator_attention += static_cast<double>(tt.trace.enc_self[layer][0][h](i, term));
    }
    r.terminator_attention /= p.config.n_heads;
    const double in = tt.trace.enc_residual[layer].row(i).template cast<double>().norm();
    const double outn = tt.trace.enc_residual[layer + 1].row(i).template cast<double>().norm();
    r.norm_ratio = in > 0 ? outn / in : 0.0;
    out.push_back(r);
  }
  return out;
}

inline std::vector<double> Ranks(const std::vector<double>& v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * (i + j);
    i = j + 1;
  }
  return r;
}

inline double Spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) return 0.0;
  const auto ra = Ranks(a), rb = Ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return da > 0 && db > 0 ? num / std::sqrt(da * db) : 0.0;
}

// ---------------------------------------------------------------------------
// Export

template <typename M>
void WriteMatrixCsv(std::ostream& out, const M& m, const std::vector<std::string>& labels = {}) {
  const bool lab = static_cast<Eigen::Index>(labels.size()) == m.cols() && m.rows() == m.cols();
  if (lab) {
    out << "row";
    for (const auto& l : labels) out << ',' << l;
    out << '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (lab) out << labels[i] << ',';
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
}

inline std::vector<std::string> TokenLabels(const TokenSeq& enc) {
  std::vector<std::string> out;
  for (TokenId t : enc) out.push_back(EncoderTokenName(t));
  return out;
}

inline OrderedJson PatchLogJson(const AnalogyTask& target, const AnalogyTask& donor, int layer,
                                int head, const PatchOutcome& o) {
  OrderedJson j;
  j["spec"] = {{"component", "encoder"},
               {"layer", layer},
               {"head", head},
               {"donor", TaskToJson(donor)},
               {"target", TaskToJson(target)}};
  j["baseline"] = ToSpaced(o.baseline);
  j["patched"] = ToSpaced(o.patched);
  j["flipped"] = o.patched == donor.target;
  return j;
}

}  // namespace analogy::interp
