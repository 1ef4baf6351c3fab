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

#include <gtest/gtest.h>

#include <sstream>

#include "analogy/interp.hpp"

namespace analogy::interp {
namespace {

ModelConfig Small() {
  ModelConfig c;
  c.embed_dim = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.ff_dim = 32;
  return c;
}

AnalogyTask PredTask() {
  AnalogyTask t;
  t.alphabet = Alphabet::Standard();
  t.examples = {{ParseLetters("ghi"), ParseLetters("fhi")}};
  t.query = ParseLetters("bcd");
  t.target = ParseLetters("acd");
  t.transformation.tag = TransformTag::kPredecessor;
  return t;
}

std::vector<const AnalogyTask*> Ptrs(const std::vector<AnalogyTask>& v) {
  std::vector<const AnalogyTask*> out;
  for (const auto& t : v) out.push_back(&t);
  return out;
}

TEST(Components, NamesRoundTrip) {
  for (Component c : {Component::kEncoderSelf, Component::kDecoderSelf, Component::kDecoderCross}) {
    EXPECT_EQ(ParseComponent(ComponentName(c)), c);
  }
  EXPECT_THROW(ParseComponent("mlp"), Error);
}

TEST(Donor, SuccessorRewrite) {
  const auto d = SuccessorDonor(PredTask());
  ASSERT_TRUE(d);
  EXPECT_EQ(ToSpaced(d->examples[0].output), "g h j");
  EXPECT_EQ(ToSpaced(d->target), "b c e");
  EXPECT_EQ(d->query, PredTask().query);
  AnalogyTask end = PredTask();
  end.query = ParseLetters("xyz");
  EXPECT_FALSE(SuccessorDonor(end).has_value());
}

TEST(Probe, PatchProbeIsAligned) {
  const auto pool = BuildAlphabetPool(20, 1);
  const PatchProbe probe = BuildPatchProbe(pool, 40, 3);
  ASSERT_EQ(probe.targets.size(), 40u);
  const Transformation succ{TransformTag::kSuccessor, 3};
  for (std::size_t i = 0; i < 40; ++i) {
    const auto& t = probe.targets[i];
    const auto& d = probe.donors[i];
    EXPECT_EQ(t.transformation.tag, TransformTag::kPredecessor);
    EXPECT_EQ(d.query, t.query);
    EXPECT_EQ(d.target, OracleAnswer(succ, d.alphabet, d.query));
    EXPECT_EQ(EncodeTask(t).encoder.size(), EncodeTask(d).encoder.size());
  }
}

TEST(Probe, MappingProbeSharesGeometry) {
  const auto tasks = BuildMappingProbe(Alphabet::Standard(), 30, 2);
  ASSERT_EQ(tasks.size(), 30u);
  const std::size_t len = EncodeTask(tasks[0]).encoder.size();
  for (const auto& t : tasks) {
    EXPECT_EQ(EncodeTask(t).encoder.size(), len);
    EXPECT_NE(t.examples[0].input, t.query);
    EXPECT_EQ(t.target, OracleAnswer({TransformTag::kPredecessor, 3}, t.alphabet, t.query));
  }
}

TEST(Attention, MeanOverGroup) {
  const auto p = InitParams<double>(Small(), 4);
  const auto tasks = BuildMappingProbe(Alphabet::Standard(), 4, 5);
  const auto mean = MeanAttention(p, Ptrs(tasks), Component::kEncoderSelf, 1);
  ASSERT_EQ(mean.size(), 2u);
  for (Eigen::Index i = 0; i < mean[0].rows(); ++i) EXPECT_NEAR(mean[0].row(i).sum(), 1.0, 1e-12);
  // Against the per-task traces.
  const TaskTrace<double> tt = CaptureTrace(p, Ptrs(tasks));
  Mat<double> manual = Mat<double>::Zero(mean[1].rows(), mean[1].cols());
  for (int b = 0; b < 4; ++b) manual += tt.trace.enc_self[1][b][1];
  EXPECT_LT((manual / 4.0 - mean[1]).cwiseAbs().maxCoeff(), 1e-12);
  const auto cross = MeanAttention(p, Ptrs(tasks), Component::kDecoderCross, 0);
  EXPECT_EQ(cross[0].cols(), mean[0].cols());

  std::vector<AnalogyTask> mixed = tasks;
  mixed.push_back(BuildMappingProbe(Alphabet::Standard(), 1, 1, 4)[0]);
  try {
    MeanAttention(p, Ptrs(mixed), Component::kEncoderSelf, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGeometryMismatch);
  }
  EXPECT_THROW(MeanAttention(p, Ptrs(tasks), Component::kEncoderSelf, 2), Error);
}

TEST(Patch, IdentityPatchChangesNothing) {
  const auto p = InitParams<float>(Small(), 7);
  const auto probe = BuildPatchProbe(BuildAlphabetPool(20, 1), 12, 8);
  const FlipReport r = FlipRate(p, 1, 0, probe.targets, probe.targets, 5);
  EXPECT_EQ(r.n, 12);
  for (const auto& o : r.outcomes) EXPECT_EQ(o.patched, o.baseline);
  EXPECT_EQ(r.flipped, r.baseline_correct);
}

TEST(Patch, BaselineIgnoresDonor) {
  const auto p = InitParams<float>(Small(), 7);
  const auto probe = BuildPatchProbe(BuildAlphabetPool(20, 1), 6, 9);
  const auto self = PatchAttentionBatch(p, 0, 1, Ptrs(probe.targets), Ptrs(probe.targets));
  const auto other = PatchAttentionBatch(p, 0, 1, Ptrs(probe.donors), Ptrs(probe.targets));
  for (std::size_t i = 0; i < self.size(); ++i) EXPECT_EQ(self[i].baseline, other[i].baseline);
  PatchSpec spec;
  spec.layer = 0;
  spec.head = 1;
  spec.donor = &probe.donors[0];
  spec.target = &probe.targets[0];
  EXPECT_EQ(PatchAttention(p, spec).patched, other[0].patched);
}

TEST(Patch, RejectsBadSites) {
  const auto p = InitParams<float>(Small(), 7);
  const AnalogyTask t = PredTask();
  AnalogyTask longer = t;
  longer.query = ParseLetters("bcde");
  EXPECT_THROW(PatchAttentionBatch(p, 2, 0, {&t}, {&t}), Error);
  EXPECT_THROW(PatchAttentionBatch(p, 0, 5, {&t}, {&t}), Error);
  try {
    PatchAttentionBatch(p, 0, 0, {&longer}, {&t});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGeometryMismatch);
  }
}

TEST(HeadScan, MatchingSelectorCells) {
  const TokenSeq enc = EncodeTask(PredTask()).encoder;
  const auto s = MatchingSelector(enc);
  EXPECT_TRUE(s.at(6, 27));   // alphabet g <-> example g
  EXPECT_TRUE(s.at(27, 6));
  EXPECT_FALSE(s.at(6, 6));   // no self match
  EXPECT_TRUE(s.at(1, 35));   // alphabet b <-> query b
  EXPECT_EQ(s.CountRow(26), 0);  // separator row
  EXPECT_EQ(s.CountRow(30), 0);  // arrow row
  EXPECT_EQ(s.CountRow(7), 2);   // h: example in, example out
}

TEST(HeadScan, CoversEveryHeadInOrder) {
  const auto p = InitParams<float>(Small(), 3);
  const auto tasks = BuildMappingProbe(Alphabet::Standard(), 5, 3);
  const auto scores = ScanMatchingHeads(p, Ptrs(tasks));
  ASSERT_EQ(scores.size(), 4u);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    EXPECT_GE(scores[i].score, 0.0);
    EXPECT_LE(scores[i].score, 1.0);
    if (i) EXPECT_GE(scores[i - 1].score, scores[i].score);
  }
}

TEST(Silhouette, TwoSeparatedClusters) {
  std::vector<ProjectedPoint> pts = {{0, 0, Role::kExampleIn}, {0, 1, Role::kExampleIn},
                                     {10, 0, Role::kQuery},    {10, 1, Role::kQuery}};
  // Every point: a = 1, b = (10 + sqrt(101)) / 2.
  const double b = (10.0 + std::sqrt(101.0)) / 2.0;
  EXPECT_NEAR(Silhouette(pts), (b - 1.0) / b, 1e-12);
  for (auto& p : pts) p.role = Role::kQuery;
  EXPECT_EQ(Silhouette(pts), 0.0);
}

TEST(Pca, AxesAreOrthonormalAndSigned) {
  const auto p = InitParams<double>(Small(), 6);
  DatasetConfig d;
  d.n_train = 0;
  d.n_val = 10;
  d.n_test = 0;
  const Dataset ds = BuildDataset(d, false);
  const RolePcaResult r = RolePca(p, Ptrs(ds.splits.at(kSplitVal)));
  ASSERT_EQ(r.separation.size(), 3u);
  const Eigen::MatrixXd gram = r.components * r.components.transpose();
  EXPECT_LT((gram - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-10);
  for (int c = 0; c < 2; ++c) {
    Eigen::Index arg;
    r.components.row(c).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(r.components(c, arg), 0.0);
  }
  EXPECT_GE(r.explained(0), r.explained(1));
  // Projected variance along each axis reproduces its eigenvalue.
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (const auto& b : r.boundaries) {
    for (const auto& pt : b) {
      sx += pt.x * pt.x;
      sy += pt.y * pt.y;
      ++n;
    }
  }
  EXPECT_NEAR(sx / (n - 1), r.explained(0), 1e-8 * r.explained(0));
  EXPECT_NEAR(sy / (n - 1), r.explained(1), 1e-8 * r.explained(0));
  for (const auto& b : r.boundaries) {
    for (const auto& pt : b) EXPECT_TRUE(IsLetterRole(pt.role));
  }
}

TEST(Mapping, CosineMatrixProperties) {
  const auto p = InitParams<double>(Small(), 6);
  auto tasks = BuildMappingProbe(Alphabet::Standard(), 6, 4);
  tasks.push_back(tasks[0]);
  const CosineReport r = MappingInvariance(p, Ptrs(tasks));
  ASSERT_EQ(r.cosine.rows(), 7);
  EXPECT_LT((r.cosine - r.cosine.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(r.cosine(0, 6), 1.0, 1e-12);
  EXPECT_LE(r.min_offdiag, r.mean_offdiag);
  EXPECT_LE(r.mean_offdiag, 1.0);
}

TEST(Elimination, RowsAndRanges) {
  const auto p = InitParams<double>(Small(), 6);
  const AnalogyTask t = PredTask();
  const auto rows = EliminationScores(p, t);
  EXPECT_EQ(rows.size(), EncodeTask(t).encoder.size() - 1);
  for (const auto& r : rows) {
    EXPECT_GE(r.terminator_attention, 0.0);
    EXPECT_LE(r.terminator_attention, 1.0);
    EXPECT_GT(r.norm_ratio, 0.0);
  }
  EXPECT_EQ(rows[26].role, Role::kSeparator);
}

TEST(Spearman, RanksAndCorrelation) {
  EXPECT_EQ(Ranks({3, 1, 1, 2}), (std::vector<double>{3, 0.5, 0.5, 2}));
  EXPECT_DOUBLE_EQ(Spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(Spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
  EXPECT_DOUBLE_EQ(Spearman({1, 1, 1}, {1, 2, 3}), 0.0);
  // Monotone transform of one side leaves the coefficient unchanged.
  EXPECT_DOUBLE_EQ(Spearman({1, 5, 2, 8}, {2, 3, 1, 4}), Spearman({1, 25, 4, 64}, {2, 3, 1, 4}));
}

TEST(Export, MatrixCsvAndPatchLog) {
  Eigen::Matrix2d m;
  m << 1, 0.5, 0, 2;
  std::ostringstream a, b;
  WriteMatrixCsv(a, m);
  WriteMatrixCsv(b, m, {"x", "->"});
  EXPECT_EQ(a.str(), "1,0.5\n0,2\n");
  EXPECT_EQ(b.str(), "row,x,->\nx,1,0.5\n->,0,2\n");
  const AnalogyTask t = PredTask();
  const auto d = *SuccessorDonor(t);
  const auto j = PatchLogJson(t, d, 1, 3, {ParseLetters("acd"), ParseLetters("bce")});
  EXPECT_TRUE(j.at("flipped").get<bool>());
  EXPECT_EQ(j.at("spec").at("head"), 3);
  EXPECT_EQ(TokenLabels({1, 27, 28})[2], "->");
}

}  // namespace
}  // namespace analogy::interp
