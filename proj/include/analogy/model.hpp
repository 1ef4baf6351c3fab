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

// Encoder-decoder transformer with hand-written reverse-mode gradients.
//
// Layout conventions:
//   * A batch is "packed": the tokens of all sequences are stacked row-wise
//     into one (total_tokens x embed_dim) matrix, so no PAD rows ever exist
//     inside the network. Attention runs per sequence on its own rows.
//   * Linear maps are y = x W + b with W stored (in x out).
//   * Pre-normalisation sublayers; a final LayerNorm closes each stack.
//   * Dropout acts on attention probabilities and feed-forward activations.
//
// Everything is templated on the scalar so gradient checks can run the same
// code in double precision; training and inference use float.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "analogy/core.hpp"
#include "analogy/tokenizer.hpp"

namespace analogy {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct ModelConfig {
  int embed_dim = 128;
  int n_layers = 3;
  int n_heads = 8;
  int ff_dim = 512;
  double dropout = 0.1;
  int enc_vocab = kVocabSize;
  int dec_vocab = kVocabSize;
  int max_len = 256;

  int head_dim() const { return embed_dim / n_heads; }

  void Validate() const {
    if (embed_dim <= 0 || n_heads <= 0 || embed_dim % n_heads != 0) {
      throw Error(ErrorCode::kInvalidConfig, "embed_dim must be divisible by n_heads");
    }
    if (n_layers <= 0 || ff_dim <= 0 || max_len <= 0) {
      throw Error(ErrorCode::kInvalidConfig, "layer count, ff_dim and max_len must be positive");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
      throw Error(ErrorCode::kInvalidConfig, "dropout must be in [0, 1)");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct LayerNormParams {
  RowVec<T> gain;
  RowVec<T> bias;
};

template <typename T>
struct AttentionParams {
  Mat<T> wq, wk, wv, wo;
  RowVec<T> bq, bk, bv, bo;
};

template <typename T>
struct FeedForwardParams {
  Mat<T> w1;
  RowVec<T> b1;
  Mat<T> w2;
  RowVec<T> b2;
};

template <typename T>
struct EncoderLayerParams {
  LayerNormParams<T> ln_attn;
  AttentionParams<T> self_attn;
  LayerNormParams<T> ln_ff;
  FeedForwardParams<T> ff;
};

template <typename T>
struct DecoderLayerParams {
  LayerNormParams<T> ln_self;
  AttentionParams<T> self_attn;
  LayerNormParams<T> ln_cross;
  AttentionParams<T> cross_attn;
  LayerNormParams<T> ln_ff;
  FeedForwardParams<T> ff;
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  Mat<T> enc_embed;
  Mat<T> dec_embed;
  std::vector<EncoderLayerParams<T>> encoder;
  LayerNormParams<T> enc_norm;
  std::vector<DecoderLayerParams<T>> decoder;
  LayerNormParams<T> dec_norm;
  Mat<T> out_w;
  RowVec<T> out_b;

  // Visits every tensor in the fixed checkpoint order. `f(name, tensor)`
  // receives an Eigen matrix or row vector.
  template <typename F>
  void ForEachTensor(F&& f) {
    VisitImpl(*this, f);
  }
  template <typename F>
  void ForEachTensor(F&& f) const {
    VisitImpl(*this, f);
  }

  std::size_t ParameterCount() const {
    std::size_t n = 0;
    ForEachTensor([&](const std::string&, const auto& t) { n += t.size(); });
    return n;
  }

  // Same shapes, all zeros.
  ModelParams ZerosLike() const {
    ModelParams z = *this;
    z.ForEachTensor([](const std::string&, auto& t) { t.setZero(); });
    return z;
  }

  template <typename U>
  ModelParams<U> Cast() const {
    ModelParams<U> out = ModelParams<U>::Shaped(config);
    std::vector<const T*> src;
    std::vector<std::size_t> sizes;
    ForEachTensor([&](const std::string&, const auto& t) {
      src.push_back(t.data());
      sizes.push_back(t.size());
    });
    std::size_t i = 0;
    out.ForEachTensor([&](const std::string&, auto& t) {
      for (std::size_t k = 0; k < sizes[i]; ++k) t.data()[k] = static_cast<U>(src[i][k]);
      ++i;
    });
    return out;
  }

  // Allocates zero tensors with the shapes implied by `c`.
  static ModelParams Shaped(const ModelConfig& c) {
    c.Validate();
    ModelParams p;
    p.config = c;
    const int d = c.embed_dim;
    auto ln = [&] {
      LayerNormParams<T> l;
      l.gain = RowVec<T>::Ones(d);
      l.bias = RowVec<T>::Zero(d);
      return l;
    };
    auto attn = [&] {
      AttentionParams<T> a;
      a.wq = a.wk = a.wv = a.wo = Mat<T>::Zero(d, d);
      a.bq = a.bk = a.bv = a.bo = RowVec<T>::Zero(d);
      return a;
    };
    auto ff = [&] {
      FeedForwardParams<T> f;
      f.w1 = Mat<T>::Zero(d, c.ff_dim);
      f.b1 = RowVec<T>::Zero(c.ff_dim);
      f.w2 = Mat<T>::Zero(c.ff_dim, d);
      f.b2 = RowVec<T>::Zero(d);
      return f;
    };
    p.enc_embed = Mat<T>::Zero(c.enc_vocab, d);
    p.dec_embed = Mat<T>::Zero(c.dec_vocab, d);
    for (int l = 0; l < c.n_layers; ++l) {
      p.encoder.push_back({ln(), attn(), ln(), ff()});
      p.decoder.push_back({ln(), attn(), ln(), attn(), ln(), ff()});
    }
    p.enc_norm = ln();
    p.dec_norm = ln();
    p.out_w = Mat<T>::Zero(d, c.dec_vocab);
    p.out_b = RowVec<T>::Zero(c.dec_vocab);
    return p;
  }

 private:
  template <typename Self, typename F>
  static void VisitImpl(Self& s, F& f) {
    auto ln = [&](const std::string& n, auto& l) {
      f(n + ".gain", l.gain);
      f(n + ".bias", l.bias);
    };
    auto attn = [&](const std::string& n, auto& a) {
      f(n + ".wq", a.wq);
      f(n + ".bq", a.bq);
      f(n + ".wk", a.wk);
      f(n + ".bk", a.bk);
      f(n + ".wv", a.wv);
      f(n + ".bv", a.bv);
      f(n + ".wo", a.wo);
      f(n + ".bo", a.bo);
    };
    auto ff = [&](const std::string& n, auto& x) {
      f(n + ".w1", x.w1);
      f(n + ".b1", x.b1);
      f(n + ".w2", x.w2);
      f(n + ".b2", x.b2);
    };
    f(std::string("enc_embed"), s.enc_embed);
    f(std::string("dec_embed"), s.dec_embed);
    for (std::size_t l = 0; l < s.encoder.size(); ++l) {
      const std::string n = "encoder." + std::to_string(l);
      ln(n + ".ln_attn", s.encoder[l].ln_attn);
      attn(n + ".self_attn", s.encoder[l].self_attn);
      ln(n + ".ln_ff", s.encoder[l].ln_ff);
      ff(n + ".ff", s.encoder[l].ff);
    }
    ln("enc_norm", s.enc_norm);
    for (std::size_t l = 0; l < s.decoder.size(); ++l) {
      const std::string n = "decoder." + std::to_string(l);
      ln(n + ".ln_self", s.decoder[l].ln_self);
      attn(n + ".self_attn", s.decoder[l].self_attn);
      ln(n + ".ln_cross", s.decoder[l].ln_cross);
      attn(n + ".cross_attn", s.decoder[l].cross_attn);
      ln(n + ".ln_ff", s.decoder[l].ln_ff);
      ff(n + ".ff", s.decoder[l].ff);
    }
    ln("dec_norm", s.dec_norm);
    f(std::string("out_w"), s.out_w);
    f(std::string("out_b"), s.out_b);
  }
};

// FNV-1a over the raw bytes of every tensor in checkpoint order.
template <typename T>
std::uint64_t Checksum(const ModelParams<T>& p) {
  std::uint64_t h = 1469598103934665603ull;
  p.ForEachTensor([&](const std::string&, const auto& t) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
    for (std::size_t i = 0; i < t.size() * sizeof(T); ++i) {
      h = (h ^ bytes[i]) * 1099511628211ull;
    }
  });
  return h;
}

// Fan-in scaled uniform: U(-sqrt(3/fan_in), sqrt(3/fan_in)) for weight
// matrices, U(-sqrt(3), sqrt(3)) for embedding rows, zero biases, unit gains.
template <typename T>
ModelParams<T> InitParams(const ModelConfig& config, std::uint64_t seed) {
  ModelParams<T> p = ModelParams<T>::Shaped(config);
  std::mt19937_64 rng(seed);
  auto fill = [&](Mat<T>& w, double fan_in) {
    const double bound = std::sqrt(3.0 / fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = static_cast<T>((2.0 * UniformUnit(rng) - 1.0) * bound);
    }
  };
  fill(p.enc_embed, 1.0);
  fill(p.dec_embed, 1.0);
  const double d = config.embed_dim;
  auto attn = [&](AttentionParams<T>& a) {
    fill(a.wq, d);
    fill(a.wk, d);
    fill(a.wv, d);
    fill(a.wo, d);
  };
  for (auto& l : p.encoder) {
    attn(l.self_attn);
    fill(l.ff.w1, d);
    fill(l.ff.w2, config.ff_dim);
  }
  for (auto& l : p.decoder) {
    attn(l.self_attn);
    attn(l.cross_attn);
    fill(l.ff.w1, d);
    fill(l.ff.w2, config.ff_dim);
  }
  fill(p.out_w, d);
  return p;
}

// ---------------------------------------------------------------------------
// Forward machinery

// Row offsets of each sequence inside a packed matrix.
struct PackedLayout {
  std::vector<int> offsets;
  std::vector<int> lengths;
  int total = 0;

  static PackedLayout Of(const std::vector<TokenSeq>& seqs) {
    PackedLayout l;
    for (const TokenSeq& s : seqs) {
      l.offsets.push_back(l.total);
      l.lengths.push_back(static_cast<int>(s.size()));
      l.total += static_cast<int>(s.size());
    }
    return l;
  }
  int size() const { return static_cast<int>(offsets.size()); }
};

enum class Mode { kTrain, kEval };

// Small counter-based generator for dropout masks (splitmix64).
class DropoutRng {
 public:
  explicit DropoutRng(std::uint64_t seed) : state_(seed) {}
  // Uniform in [0, 1) with 24 bits of resolution.
  float Next() {
    if (!have_spare_) {
      std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      z ^= z >> 31;
      spare_ = static_cast<std::uint32_t>(z >> 32);
      have_spare_ = true;
      return static_cast<float>(static_cast<std::uint32_t>(z) >> 8) * 0x1.0p-24f;
    }
    have_spare_ = false;
    return static_cast<float>(spare_ >> 8) * 0x1.0p-24f;
  }

 private:
  std::uint64_t state_;
  std::uint32_t spare_ = 0;
  bool have_spare_ = false;
};

// Replaces the post-softmax attention of one encoder self-attention head.
// `matrices[b]` is used for sequence b of the batch; it must be square with
// that sequence's length.
template <typename T>
struct AttentionPatch {
  int layer = 0;
  int head = 0;
  std::vector<Mat<T>> matrices;
};

template <typename T>
struct ForwardOptions {
  Mode mode = Mode::kEval;
  DropoutRng* rng = nullptr;  // required in train mode when dropout > 0
  bool capture = false;
  const AttentionPatch<T>* patch = nullptr;
};

template <typename T>
struct LayerNormCache {
  Mat<T> xhat;
  ColVec<T> rstd;
};

template <typename T>
struct AttentionCache {
  Mat<T> xq, xkv;       // inputs
  Mat<T> q, k, v;       // projections
  Mat<T> concat;        // head outputs before wo
  std::vector<Mat<T>> probs;  // [seq * n_heads + head], post-softmax
  std::vector<Mat<T>> masks;  // dropout scale masks, same indexing (train only)
  bool patched_head = false;
  int patched_index = -1;
};

template <typename T>
struct FeedForwardCache {
  Mat<T> x;
  Mat<T> pre;      // x w1 + b1
  Mat<T> act;      // relu(pre) after dropout
  Mat<T> mask;     // dropout scale mask (train only)
};

template <typename T>
struct EncoderLayerCache {
  LayerNormCache<T> ln_attn;
  AttentionCache<T> attn;
  LayerNormCache<T> ln_ff;
  FeedForwardCache<T> ff;
};

template <typename T>
struct DecoderLayerCache {
  LayerNormCache<T> ln_self;
  AttentionCache<T> self_attn;
  LayerNormCache<T> ln_cross;
  AttentionCache<T> cross_attn;
  LayerNormCache<T> ln_ff;
  FeedForwardCache<T> ff;
};

// Captured activations. Attention matrices are indexed [layer][seq][head];
// residual snapshots [boundary] are packed (total_tokens x embed_dim), with
// boundary 0 the embedded input and boundary l the output of layer l.
template <typename T>
struct ActivationTrace {
  std::vector<std::vector<std::vector<Mat<T>>>> enc_self;
  std::vector<std::vector<std::vector<Mat<T>>>> dec_self;
  std::vector<std::vector<std::vector<Mat<T>>>> dec_cross;
  std::vector<Mat<T>> enc_residual;
  std::vector<Mat<T>> dec_residual;
  PackedLayout enc_layout;
  PackedLayout dec_layout;
};

template <typename T>
struct EncoderState {
  PackedLayout layout;
  std::vector<TokenSeq> tokens;
  Mat<T> out;  // after the final encoder LayerNorm
  Mat<T> pre_norm;
  LayerNormCache<T> norm_cache;
  std::vector<EncoderLayerCache<T>> layers;
};

template <typename T>
struct DecoderState {
  PackedLayout layout;
  std::vector<TokenSeq> tokens;
  Mat<T> logits;
  Mat<T> final_norm_out;
  LayerNormCache<T> norm_cache;
  std::vector<DecoderLayerCache<T>> layers;
};

namespace detail {

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
const Mat<T>& PositionalTable(int max_len, int d) {
  static thread_local std::map<std::pair<int, int>, Mat<T>> cache;
  auto it = cache.find({max_len, d});
  if (it != cache.end()) return it->second;
  Mat<T> pe(max_len, d);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / d);
      pe(pos, i) = static_cast<T>(std::sin(pos * freq));
      if (i + 1 < d) pe(pos, i + 1) = static_cast<T>(std::cos(pos * freq));
    }
  }
  return cache.emplace(std::make_pair(max_len, d), std::move(pe)).first->second;
}

template <typename T>
Mat<T> Embed(const Mat<T>& table, const std::vector<TokenSeq>& seqs,
             const PackedLayout& layout, int vocab, int max_len) {
  const int d = static_cast<int>(table.cols());
  const Mat<T>& pe = PositionalTable<T>(max_len, d);
  Mat<T> x(layout.total, d);
  for (int b = 0; b < layout.size(); ++b) {
    if (layout.lengths[b] > max_len) {
      throw Error(ErrorCode::kShapeMismatch, "sequence longer than max_len");
    }
    for (int t = 0; t < layout.lengths[b]; ++t) {
      const TokenId tok = seqs[b][t];
      if (tok < 0 || tok >= vocab) {
        throw Error(ErrorCode::kVocabViolation, "token id " + std::to_string(tok));
      }
      x.row(layout.offsets[b] + t) = table.row(tok) + pe.row(t);
    }
  }
  return x;
}

template <typename T>
Mat<T> LayerNormForward(const LayerNormParams<T>& p, const Mat<T>& x,
                        LayerNormCache<T>* cache) {
  const ColVec<T> mean = x.rowwise().mean();
  Mat<T> xc = x.colwise() - mean;
  const ColVec<T> var = xc.array().square().rowwise().mean();
  const ColVec<T> rstd = (var.array() + static_cast<T>(kLayerNormEps)).rsqrt();
  Mat<T> xhat = xc.array().colwise() * rstd.array();
  Mat<T> y = (xhat.array().rowwise() * p.gain.array()).rowwise() + p.bias.array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = rstd;
  }
  return y;
}

template <typename T>
Mat<T> LayerNormBackward(const LayerNormParams<T>& p, const LayerNormCache<T>& c,
                         const Mat<T>& dy, LayerNormParams<T>& g) {
  g.gain += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  g.bias += dy.colwise().sum();
  const Mat<T> dxhat = dy.array().rowwise() * p.gain.array();
  const ColVec<T> m1 = dxhat.rowwise().mean();
  const ColVec<T> m2 = (dxhat.array() * c.xhat.array()).rowwise().mean();
  Mat<T> dx = dxhat - (c.xhat.array().colwise() * m2.array()).matrix();
  dx = dx.colwise() - m1;
  return dx.array().colwise() * c.rstd.array();
}

template <typename T>
void Softmax(Mat<T>& s, bool causal) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Eigen::Index limit = causal ? i + 1 : s.cols();
    T mx = s(i, 0);
    for (Eigen::Index j = 1; j < limit; ++j) mx = std::max(mx, s(i, j));
    T sum = 0;
    for (Eigen::Index j = 0; j < limit; ++j) {
      const T e = std::exp(s(i, j) - mx);
      s(i, j) = e;
      sum += e;
    }
    const T inv = T(1) / sum;
    for (Eigen::Index j = 0; j < limit; ++j) s(i, j) *= inv;
    for (Eigen::Index j = limit; j < s.cols(); ++j) s(i, j) = 0;
  }
}

template <typename T>
Mat<T> DropoutMask(Eigen::Index rows, Eigen::Index cols, double rate, DropoutRng& rng) {
  Mat<T> m(rows, cols);
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  const float r = static_cast<float>(rate);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Next() < r ? T(0) : keep;
  return m;
}

inline bool DropoutActive(const ModelConfig& c, Mode mode) {
  return mode == Mode::kTrain && c.dropout > 0.0;
}

// Multi-head attention. Queries come from `xq` (layout `lq`), keys and values
// from `xkv` (layout `lkv`); sequence b of one attends only to sequence b of
// the other.
template <typename T>
Mat<T> AttentionForward(const ModelConfig& c, const AttentionParams<T>& p,
                        const Mat<T>& xq, const PackedLayout& lq, const Mat<T>& xkv,
                        const PackedLayout& lkv, bool causal,
                        const ForwardOptions<T>& opt, AttentionCache<T>& cache,
                        std::vector<std::vector<Mat<T>>>* capture,
                        const AttentionPatch<T>* patch) {
  const int h_count = c.n_heads;
  const int dh = c.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  cache.q.noalias() = xq * p.wq;
  cache.q.rowwise() += p.bq;
  cache.k.noalias() = xkv * p.wk;
  cache.k.rowwise() += p.bk;
  cache.v.noalias() = xkv * p.wv;
  cache.v.rowwise() += p.bv;
  cache.concat.resize(xq.rows(), c.embed_dim);
  cache.probs.assign(static_cast<std::size_t>(lq.size()) * h_count, Mat<T>());
  const bool drop = DropoutActive(c, opt.mode);
  if (drop) cache.masks.assign(cache.probs.size(), Mat<T>());
  if (capture) capture->assign(lq.size(), std::vector<Mat<T>>(h_count));

  for (int b = 0; b < lq.size(); ++b) {
    const int nq = lq.lengths[b];
    const int nk = lkv.lengths[b];
    for (int h = 0; h < h_count; ++h) {
      auto qb = cache.q.block(lq.offsets[b], h * dh, nq, dh);
      auto kb = cache.k.block(lkv.offsets[b], h * dh, nk, dh);
      auto vb = cache.v.block(lkv.offsets[b], h * dh, nk, dh);
      Mat<T> s = (qb * kb.transpose()) * scale;
      Softmax(s, causal);
      const std::size_t idx = static_cast<std::size_t>(b) * h_count + h;
      if (patch && patch->head == h) {
        const Mat<T>& m = patch->matrices.at(b);
        if (m.rows() != nq || m.cols() != nk) {
          throw Error(ErrorCode::kGeometryMismatch, "patch matrix shape");
        }
        s = m;
      }
      if (capture) (*capture)[b][h] = s;
      if (drop) {
        cache.masks[idx] = DropoutMask<T>(nq, nk, c.dropout, *opt.rng);
        cache.concat.block(lq.offsets[b], h * dh, nq, dh).noalias() =
            (s.array() * cache.masks[idx].array()).matrix() * vb;
      } else {
        cache.concat.block(lq.offsets[b], h * dh, nq, dh).noalias() = s * vb;
      }
      cache.probs[idx] = std::move(s);
    }
  }
  cache.xq = xq;
  cache.xkv = xkv;
  Mat<T> out = cache.concat * p.wo;
  out.rowwise() += p.bo;
  return out;
}

// Returns (d xq, d xkv).
template <typename T>
std::pair<Mat<T>, Mat<T>> AttentionBackward(const ModelConfig& c,
                                            const AttentionParams<T>& p,
                                            const AttentionCache<T>& cache,
                                            const PackedLayout& lq,
                                            const PackedLayout& lkv, bool causal,
                                            const Mat<T>& dout, AttentionParams<T>& g) {
  (void)causal;  // masked entries have zero probability and zero gradient
  const int h_count = c.n_heads;
  const int dh = c.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  g.wo.noalias() += cache.concat.transpose() * dout;
  g.bo += dout.colwise().sum();
  const Mat<T> dconcat = dout * p.wo.transpose();

  Mat<T> dq = Mat<T>::Zero(cache.q.rows(), cache.q.cols());
  Mat<T> dk = Mat<T>::Zero(cache.k.rows(), cache.k.cols());
  Mat<T> dv = Mat<T>::Zero(cache.v.rows(), cache.v.cols());
  const bool drop = !cache.masks.empty();
  for (int b = 0; b < lq.size(); ++b) {
    const int nq = lq.lengths[b];
    const int nk = lkv.lengths[b];
    for (int h = 0; h < h_count; ++h) {
      const std::size_t idx = static_cast<std::size_t>(b) * h_count + h;
      const Mat<T>& prob = cache.probs[idx];
      auto qb = cache.q.block(lq.offsets[b], h * dh, nq, dh);
      auto kb = cache.k.block(lkv.offsets[b], h * dh, nk, dh);
      auto vb = cache.v.block(lkv.offsets[b], h * dh, nk, dh);
      auto dob = dconcat.block(lq.offsets[b], h * dh, nq, dh);
      Mat<T> dprob = dob * vb.transpose();
      if (drop) {
        const Mat<T> pd = prob.array() * cache.masks[idx].array();
        dv.block(lkv.offsets[b], h * dh, nk, dh).noalias() += pd.transpose() * dob;
        dprob.array() *= cache.masks[idx].array();
      } else {
        dv.block(lkv.offsets[b], h * dh, nk, dh).noalias() += prob.transpose() * dob;
      }
      const ColVec<T> rowdot = (dprob.array() * prob.array()).rowwise().sum();
      Mat<T> ds = prob.array() * (dprob.colwise() - rowdot).array();
      ds *= scale;
      dq.block(lq.offsets[b], h * dh, nq, dh).noalias() += ds * kb;
      dk.block(lkv.offsets[b], h * dh, nk, dh).noalias() += ds.transpose() * qb;
    }
  }
  g.wq.noalias() += cache.xq.transpose() * dq;
  g.bq += dq.colwise().sum();
  g.wk.noalias() += cache.xkv.transpose() * dk;
  g.bk += dk.colwise().sum();
  g.wv.noalias() += cache.xkv.transpose() * dv;
  g.bv += dv.colwise().sum();
  Mat<T> dxq = dq * p.wq.transpose();
  Mat<T> dxkv = dk * p.wk.transpose();
  dxkv.noalias() += dv * p.wv.transpose();
  return {std::move(dxq), std::move(dxkv)};
}

template <typename T>
Mat<T> FeedForwardForward(const ModelConfig& c, const FeedForwardParams<T>& p,
                          const Mat<T>& x, const ForwardOptions<T>& opt,
                          FeedForwardCache<T>& cache) {
  cache.x = x;
  cache.pre.noalias() = x * p.w1;
  cache.pre.rowwise() += p.b1;
  cache.act = cache.pre.cwiseMax(T(0));
  if (DropoutActive(c, opt.mode)) {
    cache.mask = DropoutMask<T>(cache.act.rows(), cache.act.cols(), c.dropout, *opt.rng);
    cache.act.array() *= cache.mask.array();
  } else {
    cache.mask.resize(0, 0);
  }
  Mat<T> y = cache.act * p.w2;
  y.rowwise() += p.b2;
  return y;
}

template <typename T>
Mat<T> FeedForwardBackward(const FeedForwardParams<T>& p, const FeedForwardCache<T>& cache,
                           const Mat<T>& dy, FeedForwardParams<T>& g) {
  g.w2.noalias() += cache.act.transpose() * dy;
  g.b2 += dy.colwise().sum();
  Mat<T> dact = dy * p.w2.transpose();
  if (cache.mask.size() > 0) dact.array() *= cache.mask.array();
  dact = (cache.pre.array() > T(0)).select(dact, T(0));
  g.w1.noalias() += cache.x.transpose() * dact;
  g.b1 += dact.colwise().sum();
  return dact * p.w1.transpose();
}

}  // namespace detail

template <typename T>
EncoderState<T> EncoderForward(const ModelParams<T>& p, const std::vector<TokenSeq>& seqs,
                               const ForwardOptions<T>& opt,
                               ActivationTrace<T>* trace = nullptr) {
  using namespace detail;
  const ModelConfig& c = p.config;
  if (DropoutActive(c, opt.mode) && !opt.rng) {
    throw Error(ErrorCode::kInvalidConfig, "train mode needs a dropout generator");
  }
  EncoderState<T> st;
  st.tokens = seqs;
  st.layout = PackedLayout::Of(seqs);
  Mat<T> x = Embed(p.enc_embed, seqs, st.layout, c.enc_vocab, c.max_len);
  if (trace) {
    trace->enc_layout = st.layout;
    trace->enc_residual = {x};
    trace->enc_self.assign(c.n_layers, {});
  }
  st.layers.resize(c.n_layers);
  for (int l = 0; l < c.n_layers; ++l) {
    const EncoderLayerParams<T>& lp = p.encoder[l];
    EncoderLayerCache<T>& lc = st.layers[l];
    const AttentionPatch<T>* patch =
        (opt.patch && opt.patch->layer == l) ? opt.patch : nullptr;
    Mat<T> h = LayerNormForward(lp.ln_attn, x, &lc.ln_attn);
    x += AttentionForward(c, lp.self_attn, h, st.layout, h, st.layout, false, opt, lc.attn,
                          trace ? &trace->enc_self[l] : nullptr, patch);
    h = LayerNormForward(lp.ln_ff, x, &lc.ln_ff);
    x += FeedForwardForward(c, lp.ff, h, opt, lc.ff);
    if (trace) trace->enc_residual.push_back(x);
  }
  st.pre_norm = x;
  st.out = LayerNormForward(p.enc_norm, x, &st.norm_cache);
  return st;
}

template <typename T>
DecoderState<T> DecoderForward(const ModelParams<T>& p, const EncoderState<T>& enc,
                               const std::vector<TokenSeq>& seqs,
                               const ForwardOptions<T>& opt,
                               ActivationTrace<T>* trace = nullptr) {
  using namespace detail;
  const ModelConfig& c = p.config;
  if (static_cast<int>(seqs.size()) != enc.layout.size()) {
    throw Error(ErrorCode::kShapeMismatch, "encoder and decoder batch sizes differ");
  }
  DecoderState<T> st;
  st.tokens = seqs;
  st.layout = PackedLayout::Of(seqs);
  for (int len : st.layout.lengths) {
    if (len == 0) throw Error(ErrorCode::kShapeMismatch, "empty decoder sequence");
  }
  Mat<T> y = Embed(p.dec_embed, seqs, st.layout, c.dec_vocab, c.max_len);
  if (trace) {
    trace->dec_layout = st.layout;
    trace->dec_residual = {y};
    trace->dec_self.assign(c.n_layers, {});
    trace->dec_cross.assign(c.n_layers, {});
  }
  st.layers.resize(c.n_layers);
  for (int l = 0; l < c.n_layers; ++l) {
    const DecoderLayerParams<T>& lp = p.decoder[l];
    DecoderLayerCache<T>& lc = st.layers[l];
    Mat<T> h = LayerNormForward(lp.ln_self, y, &lc.ln_self);
    y += AttentionForward(c, lp.self_attn, h, st.layout, h, st.layout, true, opt,
                          lc.self_attn, trace ? &trace->dec_self[l] : nullptr,
                          static_cast<const AttentionPatch<T>*>(nullptr));
    h = LayerNormForward(lp.ln_cross, y, &lc.ln_cross);
    y += AttentionForward(c, lp.cross_attn, h, st.layout, enc.out, enc.layout, false, opt,
                          lc.cross_attn, trace ? &trace->dec_cross[l] : nullptr,
                          static_cast<const AttentionPatch<T>*>(nullptr));
    h = LayerNormForward(lp.ln_ff, y, &lc.ln_ff);
    y += FeedForwardForward(c, lp.ff, h, opt, lc.ff);
    if (trace) trace->dec_residual.push_back(y);
  }
  st.final_norm_out = LayerNormForward(p.dec_norm, y, &st.norm_cache);
  st.logits = st.final_norm_out * p.out_w;
  st.logits.rowwise() += p.out_b;
  return st;
}

template <typename T>
struct ForwardResult {
  Mat<T> logits;  // packed decoder rows x dec_vocab
  PackedLayout layout;
  std::optional<ActivationTrace<T>> trace;
};

// Full forward pass on variable-length token sequences.
template <typename T>
ForwardResult<T> Forward(const ModelParams<T>& p, const std::vector<TokenSeq>& enc_tokens,
                         const std::vector<TokenSeq>& dec_tokens,
                         const ForwardOptions<T>& opt) {
  ForwardResult<T> r;
  ActivationTrace<T> trace;
  ActivationTrace<T>* tp = opt.capture ? &trace : nullptr;
  EncoderState<T> enc = EncoderForward(p, enc_tokens, opt, tp);
  DecoderState<T> dec = DecoderForward(p, enc, dec_tokens, opt, tp);
  r.logits = std::move(dec.logits);
  r.layout = dec.layout;
  if (tp) r.trace = std::move(trace);
  return r;
}

// Padded-batch entry point: PAD positions are dropped before the network
// sees them, so they cannot influence any attention or loss term.
template <typename T>
ForwardResult<T> Forward(const ModelParams<T>& p, const PaddedBatch& enc,
                         const PaddedBatch& dec, const ForwardOptions<T>& opt) {
  if (enc.rows != dec.rows) throw Error(ErrorCode::kShapeMismatch, "batch row counts differ");
  return Forward(p, Unpad(enc), Unpad(dec), opt);
}

// Mean cross-entropy over target positions whose id is not PAD. Writes the
// gradient w.r.t. the logits when `dlogits` is given. Returns 0 when every
// target is PAD.
template <typename T>
T CrossEntropy(const Mat<T>& logits, const std::vector<TokenId>& targets,
               Mat<T>* dlogits = nullptr) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "targets and logits rows differ");
  }
  int count = 0;
  for (TokenId t : targets) count += t != kPad;
  if (dlogits) dlogits->setZero(logits.rows(), logits.cols());
  if (count == 0) return T(0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (targets[i] == kPad) continue;
    const T mx = logits.row(i).maxCoeff();
    const RowVec<T> e = (logits.row(i).array() - mx).exp().matrix();
    const T sum = e.sum();
    total += static_cast<double>(std::log(sum) + mx - logits(i, targets[i]));
    if (dlogits) {
      dlogits->row(i) = e / (sum * static_cast<T>(count));
      (*dlogits)(i, targets[i]) -= T(1) / static_cast<T>(count);
    }
  }
  return static_cast<T>(total / count);
}

struct TrainBatch {
  std::vector<TokenSeq> encoder;
  std::vector<TokenSeq> decoder_input;
  std::vector<TokenSeq> decoder_target;

  static TrainBatch FromTasks(const std::vector<const AnalogyTask*>& tasks) {
    TrainBatch b;
    for (const AnalogyTask* t : tasks) {
      EncodedTask e = EncodeTask(*t);
      b.encoder.push_back(std::move(e.encoder));
      b.decoder_input.push_back(std::move(e.decoder_input));
      b.decoder_target.push_back(std::move(e.decoder_target));
    }
    return b;
  }

  std::vector<TokenId> FlatTargets() const {
    std::vector<TokenId> flat;
    for (const TokenSeq& s : decoder_target) flat.insert(flat.end(), s.begin(), s.end());
    return flat;
  }
};

// Loss of a batch and, when `grads` is non-null, exact gradients of that loss
// accumulated into `grads` (which must be shaped like `p`).
template <typename T>
T LossAndGradients(const ModelParams<T>& p, const TrainBatch& batch, Mode mode,
                   std::uint64_t dropout_seed, ModelParams<T>* grads) {
  using namespace detail;
  const ModelConfig& c = p.config;
  for (std::size_t i = 0; i < batch.decoder_input.size(); ++i) {
    if (batch.decoder_input[i].size() != batch.decoder_target[i].size()) {
      throw Error(ErrorCode::kShapeMismatch, "decoder input/target lengths differ");
    }
  }
  DropoutRng rng(dropout_seed);
  ForwardOptions<T> opt;
  opt.mode = mode;
  opt.rng = &rng;
  EncoderState<T> enc = EncoderForward(p, batch.encoder, opt);
  DecoderState<T> dec = DecoderForward(p, enc, batch.decoder_input, opt);
  Mat<T> dlogits;
  const T loss = CrossEntropy(dec.logits, batch.FlatTargets(), grads ? &dlogits : nullptr);
  if (!std::isfinite(static_cast<double>(loss))) {
    throw Error(ErrorCode::kNonFinite, "loss is not finite");
  }
  if (!grads) return loss;
  ModelParams<T>& g = *grads;

  // Output projection and final decoder norm.
  g.out_w.noalias() += dec.final_norm_out.transpose() * dlogits;
  g.out_b += dlogits.colwise().sum();
  Mat<T> dy = LayerNormBackward(p.dec_norm, dec.norm_cache, Mat<T>(dlogits * p.out_w.transpose()),
                                g.dec_norm);

  Mat<T> denc = Mat<T>::Zero(enc.out.rows(), enc.out.cols());
  for (int l = c.n_layers - 1; l >= 0; --l) {
    const DecoderLayerParams<T>& lp = p.decoder[l];
    const DecoderLayerCache<T>& lc = dec.layers[l];
    DecoderLayerParams<T>& lg = g.decoder[l];
    {
      Mat<T> dh = FeedForwardBackward(lp.ff, lc.ff, dy, lg.ff);
      dy += LayerNormBackward(lp.ln_ff, lc.ln_ff, dh, lg.ln_ff);
    }
    {
      auto [dq, dkv] = AttentionBackward(c, lp.cross_attn, lc.cross_attn, dec.layout,
                                         enc.layout, false, dy, lg.cross_attn);
      denc += dkv;
      dy += LayerNormBackward(lp.ln_cross, lc.ln_cross, dq, lg.ln_cross);
    }
    {
      auto [dq, dkv] = AttentionBackward(c, lp.self_attn, lc.self_attn, dec.layout,
                                         dec.layout, true, dy, lg.self_attn);
      dq += dkv;
      dy += LayerNormBackward(lp.ln_self, lc.ln_self, dq, lg.ln_self);
    }
  }
  for (int b = 0; b < dec.layout.size(); ++b) {
    for (int t = 0; t < dec.layout.lengths[b]; ++t) {
      g.dec_embed.row(batch.decoder_input[b][t]) += dy.row(dec.layout.offsets[b] + t);
    }
  }

  Mat<T> dx = LayerNormBackward(p.enc_norm, enc.norm_cache, denc, g.enc_norm);
  for (int l = c.n_layers - 1; l >= 0; --l) {
    const EncoderLayerParams<T>& lp = p.encoder[l];
    const EncoderLayerCache<T>& lc = enc.layers[l];
    EncoderLayerParams<T>& lg = g.encoder[l];
    {
      Mat<T> dh = FeedForwardBackward(lp.ff, lc.ff, dx, lg.ff);
      dx += LayerNormBackward(lp.ln_ff, lc.ln_ff, dh, lg.ln_ff);
    }
    {
      auto [dq, dkv] = AttentionBackward(c, lp.self_attn, lc.attn, enc.layout, enc.layout,
                                         false, dx, lg.self_attn);
      dq += dkv;
      dx += LayerNormBackward(lp.ln_attn, lc.ln_attn, dq, lg.ln_attn);
    }
  }
  for (int b = 0; b < enc.layout.size(); ++b) {
    for (int t = 0; t < enc.layout.lengths[b]; ++t) {
      g.enc_embed.row(batch.encoder[b][t]) += dx.row(enc.layout.offsets[b] + t);
    }
  }
  return loss;
}

}  // namespace analogy
