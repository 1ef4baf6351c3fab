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

// Letters, alphabets and transformation tags shared by every other module.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace analogy {

enum class ErrorCode {
  kLastLetter,
  kFirstLetter,
  kOutOfRange,
  kInvalidLevel,
  kInapplicable,
  kMalformedQuery,
  kExhaustedSampling,
  kVocabViolation,
  kShapeMismatch,
  kNonFinite,
  kDiverged,
  kInsufficientRuns,
  kGeometryMismatch,
  kDegenerateCovariance,
  kLengthMismatch,
  kParseError,
  kIndexUnderflow,
  kTimeout,
  kAuthFailure,
  kRateLimited,
  kMalformedResponse,
  kParseFailure,
  kInvalidConfig,
  kIo,
  kChecksumMismatch,
};

inline const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kLastLetter: return "LastLetter";
    case ErrorCode::kFirstLetter: return "FirstLetter";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kInvalidLevel: return "InvalidLevel";
    case ErrorCode::kInapplicable: return "Inapplicable";
    case ErrorCode::kMalformedQuery: return "MalformedQuery";
    case ErrorCode::kExhaustedSampling: return "ExhaustedSampling";
    case ErrorCode::kVocabViolation: return "VocabViolation";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kDiverged: return "Diverged";
    case ErrorCode::kInsufficientRuns: return "InsufficientRuns";
    case ErrorCode::kGeometryMismatch: return "GeometryMismatch";
    case ErrorCode::kDegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIndexUnderflow: return "IndexUnderflow";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kAuthFailure: return "AuthFailure";
    case ErrorCode::kRateLimited: return "RateLimited";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kParseFailure: return "ParseFailure";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
  }
  return "Unknown";
}

// All library failures are reported through this exception type; the code
// identifies the failure class and the message carries the detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + what),
        code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline constexpr int kAlphabetSize = 26;

class Letter {
 public:
  constexpr Letter() = default;
  constexpr explicit Letter(int id) : id_(static_cast<std::uint8_t>(id)) {
    if (id < 0 || id >= kAlphabetSize) {
      throw Error(ErrorCode::kOutOfRange, "letter id " + std::to_string(id));
    }
  }

  // Only lowercase a-z are accepted.
  static Letter FromChar(char c) {
    if (c < 'a' || c > 'z') {
      throw Error(ErrorCode::kVocabViolation,
                  std::string("not a lowercase letter: '") + c + "'");
    }
    return Letter(c - 'a');
  }

  constexpr int id() const { return id_; }
  constexpr char symbol() const { return static_cast<char>('a' + id_); }

  friend constexpr bool operator==(Letter a, Letter b) = default;
  friend constexpr auto operator<=>(Letter a, Letter b) = default;

 private:
  std::uint8_t id_ = 0;
};

using LetterString = std::vector<Letter>;

// "a b c" style rendering used by datasets and reports.
inline std::string ToSpaced(const LetterString& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += s[i].symbol();
  }
  return out;
}

inline std::string ToCompact(const LetterString& s) {
  std::string out;
  for (Letter l : s) out += l.symbol();
  return out;
}

// Accepts both "a b c" and "abc". Whitespace is the only separator.
inline LetterString ParseLetters(std::string_view text) {
  LetterString out;
  for (char c : text) {
    if (c == ' ' || c == '\t') continue;
    out.push_back(Letter::FromChar(c));
  }
  return out;
}

// Deterministic bounded draw; std::uniform_int_distribution is not
// reproducible across standard library implementations.
inline std::uint64_t UniformIndex(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::kOutOfRange, "UniformIndex(0)");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline double UniformUnit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// splitmix64 finalizer, used to derive independent seeds from (seed, index).
inline std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline constexpr std::array<int, 5> kPermutationLevels = {0, 2, 5, 10, 20};

inline bool IsPermutationLevel(int k) {
  for (int level : kPermutationLevels) {
    if (level == k) return true;
  }
  return false;
}

class Alphabet {
 public:
  Alphabet() {
    for (int i = 0; i < kAlphabetSize; ++i) order_[i] = Letter(i);
    Reindex();
  }

  static Alphabet Standard() { return Alphabet(); }

  // Builds an alphabet from an explicit order. The order must be a
  // permutation of a..z.
  static Alphabet FromOrder(const std::array<Letter, kAlphabetSize>& order,
                            int permutation_count = 0, std::uint64_t seed = 0) {
    Alphabet a;
    a.order_ = order;
    a.permutation_count_ = permutation_count;
    a.seed_ = seed;
    std::array<bool, kAlphabetSize> seen{};
    for (Letter l : order) {
      if (seen[l.id()]) {
        throw Error(ErrorCode::kOutOfRange, "alphabet order repeats a letter");
      }
      seen[l.id()] = true;
    }
    a.Reindex();
    return a;
  }

  static Alphabet FromString(std::string_view text, int permutation_count = 0,
                             std::uint64_t seed = 0) {
    LetterString letters = ParseLetters(text);
    if (letters.size() != kAlphabetSize) {
      throw Error(ErrorCode::kParseError,
                  "alphabet needs 26 letters, got " +
                      std::to_string(letters.size()));
    }
    std::array<Letter, kAlphabetSize> order;
    std::copy(letters.begin(), letters.end(), order.begin());
    return FromOrder(order, permutation_count, seed);
  }

  const std::array<Letter, kAlphabetSize>& order() const { return order_; }
  int permutation_count() const { return permutation_count_; }
  std::uint64_t seed() const { return seed_; }

  Letter at(int index) const {
    if (index < 0 || index >= kAlphabetSize) {
      throw Error(ErrorCode::kOutOfRange, "alphabet index " + std::to_string(index));
    }
    return order_[index];
  }
  int index_of(Letter l) const { return position_[l.id()]; }

  // 26-character compact form, e.g. "abcdefghijklmnopqrstuvwxyz".
  std::string ToString() const {
    std::string s;
    for (Letter l : order_) s += l.symbol();
    return s;
  }

  friend bool operator==(const Alphabet& a, const Alphabet& b) {
    return a.order_ == b.order_;
  }

 private:
  void Reindex() {
    for (int i = 0; i < kAlphabetSize; ++i) position_[order_[i].id()] = i;
  }

  std::array<Letter, kAlphabetSize> order_{};
  std::array<int, kAlphabetSize> position_{};
  int permutation_count_ = 0;
  std::uint64_t seed_ = 0;
};

inline Letter SuccessorOf(const Alphabet& alphabet, Letter letter) {
  const int i = alphabet.index_of(letter);
  if (i == kAlphabetSize - 1) {
    throw Error(ErrorCode::kLastLetter,
                std::string("no successor for '") + letter.symbol() + "'");
  }
  return alphabet.at(i + 1);
}

inline Letter PredecessorOf(const Alphabet& alphabet, Letter letter) {
  const int i = alphabet.index_of(letter);
  if (i == 0) {
    throw Error(ErrorCode::kFirstLetter,
                std::string("no predecessor for '") + letter.symbol() + "'");
  }
  return alphabet.at(i - 1);
}

// Contiguous slice order[start, start + length).
inline LetterString Run(const Alphabet& alphabet, int start, int length) {
  if (start < 0 || length < 2 || length > 6 || start + length > kAlphabetSize) {
    throw Error(ErrorCode::kOutOfRange, "run(start=" + std::to_string(start) +
                                            ", length=" + std::to_string(length) +
                                            ")");
  }
  LetterString out;
  out.reserve(length);
  for (int i = 0; i < length; ++i) out.push_back(alphabet.at(start + i));
  return out;
}

// The position swaps applied by PermuteAlphabet, in application order.
inline std::vector<std::pair<int, int>> Transpositions(int k, std::uint64_t seed) {
  if (!IsPermutationLevel(k)) {
    throw Error(ErrorCode::kInvalidLevel, "permutation level " + std::to_string(k));
  }
  std::mt19937_64 rng(seed);
  std::vector<std::pair<int, int>> swaps;
  swaps.reserve(k);
  for (int s = 0; s < k; ++s) {
    const int i = static_cast<int>(UniformIndex(rng, kAlphabetSize));
    int j = static_cast<int>(UniformIndex(rng, kAlphabetSize - 1));
    if (j >= i) ++j;
    swaps.emplace_back(i, j);
  }
  return swaps;
}

inline Alphabet PermuteAlphabet(const Alphabet& base, int k, std::uint64_t seed) {
  std::array<Letter, kAlphabetSize> order = base.order();
  for (auto [i, j] : Transpositions(k, seed)) std::swap(order[i], order[j]);
  return Alphabet::FromOrder(order, k, seed);
}

// ---------------------------------------------------------------------------
// Transformations

enum class TransformTag {
  // Seen in training.
  kExtend,
  kSuccessor,
  kPredecessor,
  kRemoveRedundant,
  kFix,
  kSort,
  kSortGroup,
  kRmRedInterleave,
  kRmRedSucc,
  kFixExt,
  // Compositions of seen transformations.
  kRmRedSort,
  kExtPred,
  kFixIL,
  kExtGp,
  kExtExtSucc,
  kFixPredSucc,
  // Novel.
  kReverse,
  kShift,
  kReplicate,
};

inline constexpr int kNumTransforms = 19;

enum class TransformSplit { kSeen, kCompositional, kNovel };

inline constexpr std::array<TransformTag, kNumTransforms> kAllTransforms = {
    TransformTag::kExtend,      TransformTag::kSuccessor,
    TransformTag::kPredecessor, TransformTag::kRemoveRedundant,
    TransformTag::kFix,         TransformTag::kSort,
    TransformTag::kSortGroup,   TransformTag::kRmRedInterleave,
    TransformTag::kRmRedSucc,   TransformTag::kFixExt,
    TransformTag::kRmRedSort,   TransformTag::kExtPred,
    TransformTag::kFixIL,       TransformTag::kExtGp,
    TransformTag::kExtExtSucc,  TransformTag::kFixPredSucc,
    TransformTag::kReverse,     TransformTag::kShift,
    TransformTag::kReplicate,
};

inline TransformSplit SplitOf(TransformTag tag) {
  const int i = static_cast<int>(tag);
  if (i < 10) return TransformSplit::kSeen;
  if (i < 16) return TransformSplit::kCompositional;
  return TransformSplit::kNovel;
}

inline std::vector<TransformTag> TransformsIn(TransformSplit split) {
  std::vector<TransformTag> out;
  for (TransformTag t : kAllTransforms) {
    if (SplitOf(t) == split) out.push_back(t);
  }
  return out;
}

inline const char* TransformName(TransformTag tag) {
  switch (tag) {
    case TransformTag::kExtend: return "Extend";
    case TransformTag::kSuccessor: return "Successor";
    case TransformTag::kPredecessor: return "Predecessor";
    case TransformTag::kRemoveRedundant: return "RemoveRedundant";
    case TransformTag::kFix: return "Fix";
    case TransformTag::kSort: return "Sort";
    case TransformTag::kSortGroup: return "SortGroup";
    case TransformTag::kRmRedInterleave: return "RmRedInterleave";
    case TransformTag::kRmRedSucc: return "RmRedSucc";
    case TransformTag::kFixExt: return "FixExt";
    case TransformTag::kRmRedSort: return "RmRedSort";
    case TransformTag::kExtPred: return "ExtPred";
    case TransformTag::kFixIL: return "FixIL";
    case TransformTag::kExtGp: return "ExtGp";
    case TransformTag::kExtExtSucc: return "ExtExtSucc";
    case TransformTag::kFixPredSucc: return "FixPredSucc";
    case TransformTag::kReverse: return "Reverse";
    case TransformTag::kShift: return "Shift";
    case TransformTag::kReplicate: return "Replicate";
  }
  return "?";
}

inline const char* SplitName(TransformSplit split) {
  switch (split) {
    case TransformSplit::kSeen: return "seen";
    case TransformSplit::kCompositional: return "compositional";
    case TransformSplit::kNovel: return "novel";
  }
  return "?";
}

inline TransformTag ParseTransformTag(std::string_view name) {
  for (TransformTag t : kAllTransforms) {
    if (name == TransformName(t)) return t;
  }
  throw Error(ErrorCode::kParseError, "unknown transformation '" + std::string(name) + "'");
}

struct Transformation {
  TransformTag tag = TransformTag::kExtend;
  int shift_offset = 3;  // only meaningful for kShift

  friend bool operator==(const Transformation&, const Transformation&) = default;
};

}  // namespace analogy
