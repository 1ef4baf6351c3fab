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

// Checkpoint files.
//
//   bytes 0..7    magic "ANLGCKPT"
//   bytes 8..11   format version (uint32, little endian)
//   bytes 12..19  manifest length N (uint64, little endian)
//   next N bytes  manifest JSON: config, vocab, seed, epoch, checksum and the
//                 tensor table [{name, rows, cols}] in storage order
//   remainder     float32 little-endian tensor data, row-major, in the order
//                 of the tensor table
//
// Readers accept any version <= kCheckpointVersion and ignore unknown
// manifest keys.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "analogy/io.hpp"
#include "analogy/model.hpp"

namespace analogy {

inline constexpr char kCheckpointMagic[8] = {'A', 'N', 'L', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t seed = 0;
  int epoch = 0;
  std::uint64_t checksum = 0;
  Json extra = Json::object();  // free-form provenance (run name, dataset seed, ...)
};

inline OrderedJson ModelConfigToJson(const ModelConfig& c) {
  return {{"embed_dim", c.embed_dim}, {"n_layers", c.n_layers}, {"n_heads", c.n_heads},
          {"ff_dim", c.ff_dim},       {"dropout", c.dropout},   {"enc_vocab", c.enc_vocab},
          {"dec_vocab", c.dec_vocab}, {"max_len", c.max_len}};
}

inline ModelConfig ModelConfigFromJson(const Json& j) {
  ModelConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.enc_vocab = j.value("enc_vocab", c.enc_vocab);
  c.dec_vocab = j.value("dec_vocab", c.dec_vocab);
  c.max_len = j.value("max_len", c.max_len);
  c.Validate();
  return c;
}

inline std::string HexChecksum(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

namespace detail {

template <typename U>
void WriteLe(std::ostream& out, U v) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U ReadLe(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(U));
  if (!in) throw Error(ErrorCode::kIo, "truncated checkpoint header");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void SaveCheckpoint(const std::filesystem::path& path, const ModelParams<float>& p,
                           CheckpointMeta meta) {
  meta.checksum = Checksum(p);
  OrderedJson m;
  m["format_version"] = kCheckpointVersion;
  m["config"] = ModelConfigToJson(p.config);
  m["vocab"] = Json::parse(VocabManifest());
  m["seed"] = meta.seed;
  m["epoch"] = meta.epoch;
  m["checksum"] = HexChecksum(meta.checksum);
  m["extra"] = meta.extra;
  OrderedJson table = OrderedJson::array();
  p.ForEachTensor([&](const std::string& name, const auto& t) {
    table.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  });
  m["tensors"] = std::move(table);
  const std::string manifest = m.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::WriteLe<std::uint32_t>(out, kCheckpointVersion);
    detail::WriteLe<std::uint64_t>(out, manifest.size());
    out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    p.ForEachTensor([&](const std::string&, const auto& t) {
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        std::uint32_t bits;
        const float f = t.data()[i];
        std::memcpy(&bits, &f, sizeof(bits));
        detail::WriteLe<std::uint32_t>(out, bits);
      }
    });
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct LoadedCheckpoint {
  ModelParams<float> params;
  CheckpointMeta meta;
};

inline LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::kParseError, path.string() + " is not a checkpoint");
  }
  const auto version = detail::ReadLe<std::uint32_t>(in);
  if (version > kCheckpointVersion) {
    throw Error(ErrorCode::kParseError, "checkpoint version " + std::to_string(version) +
                                            " is newer than this build");
  }
  const auto len = detail::ReadLe<std::uint64_t>(in);
  std::string manifest(len, '\0');
  in.read(manifest.data(), static_cast<std::streamsize>(len));
  const Json m = Json::parse(manifest);

  LoadedCheckpoint ck;
  ck.params = ModelParams<float>::Shaped(ModelConfigFromJson(m.at("config")));
  ck.meta.seed = m.value("seed", std::uint64_t{0});
  ck.meta.epoch = m.value("epoch", 0);
  ck.meta.extra = m.value("extra", Json::object());
  const std::string expected = m.at("checksum").get<std::string>();

  const Json& table = m.at("tensors");
  std::size_t i = 0;
  ck.params.ForEachTensor([&](const std::string& name, auto& t) {
    if (i >= table.size() || table[i].at("name") != name ||
        table[i].at("rows").get<Eigen::Index>() != t.rows() ||
        table[i].at("cols").get<Eigen::Index>() != t.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "checkpoint tensor table mismatch at " + name);
    }
    ++i;
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      const auto bits = detail::ReadLe<std::uint32_t>(in);
      float f;
      std::memcpy(&f, &bits, sizeof(f));
      t.data()[k] = f;
    }
  });
  ck.meta.checksum = Checksum(ck.params);
  if (HexChecksum(ck.meta.checksum) != expected) {
    throw Error(ErrorCode::kChecksumMismatch, path.string() + ": expected " + expected +
                                                  ", computed " +
                                                  HexChecksum(ck.meta.checksum));
  }
  return ck;
}

}  // namespace analogy
