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

// Transformation semantics, analogy task sampling and dataset assembly.
//
// Every transformation has two independent implementations:
//   * MakeInstance builds (input, output) constructively from a sampled
//     geometry (start, length, decoration).
//   * OracleAnswer recovers the output from the input alone by parsing the
//     input against the transformation's schema.
// Generated tasks are checked against the oracle, so the two cannot drift.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "analogy/core.hpp"

namespace analogy {

struct Decoration {
  int dup_pos = -1;                   // RemoveRedundant family
  int fix_pos = -1;                   // Fix family
  std::optional<Letter> fix_letter;   // Fix family
  std::optional<Letter> interleave;   // interleave family
  std::vector<int> shuffle;           // Sort family: input[i] = base[shuffle[i]]
  int group_multiplicity = 0;         // SortGroup / ExtGp
  int shift_offset = 0;               // Shift
};

struct InstanceSpec {
  Transformation transformation;
  int base_start = 0;
  int base_length = 0;
  Decoration decoration;
};

struct Instance {
  LetterString input;
  LetterString output;
  InstanceSpec spec;
};

// Parameters that stay fixed across all pairs of one task.
struct SharedParams {
  std::optional<Letter> interleave;
};

namespace detail {

inline bool UsesInterleave(TransformTag t) {
  return t == TransformTag::kRmRedInterleave || t == TransformTag::kFixIL;
}

inline bool UsesFix(TransformTag t) {
  return t == TransformTag::kFix || t == TransformTag::kFixExt ||
         t == TransformTag::kFixIL || t == TransformTag::kFixPredSucc;
}

inline bool UsesDuplicate(TransformTag t) {
  return t == TransformTag::kRemoveRedundant ||
         t == TransformTag::kRmRedInterleave || t == TransformTag::kRmRedSucc ||
         t == TransformTag::kRmRedSort;
}

// Letters needed before the run start and after the run end.
struct Margins {
  int before = 0;
  int after = 0;
  int min_length = 2;
};

inline Margins MarginsFor(const Transformation& t) {
  Margins m;
  switch (t.tag) {
    case TransformTag::kExtend:
    case TransformTag::kSuccessor:
    case TransformTag::kRmRedSucc:
    case TransformTag::kExtGp:
      m.after = 1;
      break;
    case TransformTag::kFixExt:
      m.after = 1;
      break;
    case TransformTag::kPredecessor:
      m.before = 1;
      break;
    case TransformTag::kExtPred:
      m.before = 1;
      m.after = 1;
      break;
    case TransformTag::kFixPredSucc:
      m.before = 1;
      m.after = 1;
      break;
    case TransformTag::kExtExtSucc:
      m.after = 3;
      break;
    case TransformTag::kShift:
      m.after = t.shift_offset;
      break;
    default:
      break;
  }
  // One corrupted letter in a two-letter run cannot be located.
  if (UsesFix(t.tag)) m.min_length = 3;
  return m;
}

inline LetterString Interleave(const LetterString& letters, Letter x) {
  LetterString out;
  for (std::size_t i = 0; i < letters.size(); ++i) {
    if (i) out.push_back(x);
    out.push_back(letters[i]);
  }
  return out;
}

inline LetterString Doubled(const LetterString& letters) {
  LetterString out;
  for (Letter l : letters) {
    out.push_back(l);
    out.push_back(l);
  }
  return out;
}

inline std::vector<int> RandomPermutation(std::mt19937_64& rng, int n,
                                          bool non_identity) {
  std::vector<int> p(n);
  for (;;) {
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
      std::swap(p[i], p[UniformIndex(rng, i + 1)]);
    }
    if (!non_identity || n < 2) return p;
    for (int i = 0; i < n; ++i) {
      if (p[i] != i) return p;
    }
  }
}

[[noreturn]] inline void Malformed(const Transformation& t, const LetterString& q,
                                   const std::string& why) {
  throw Error(ErrorCode::kMalformedQuery, std::string(TransformName(t.tag)) +
                                              " query '" + ToSpaced(q) +
                                              "': " + why);
}

// Start index when `letters` is a contiguous slice of the alphabet.
inline std::optional<int> RunStart(const Alphabet& a, const LetterString& letters) {
  if (letters.empty()) return std::nullopt;
  const int s = a.index_of(letters[0]);
  if (s + static_cast<int>(letters.size()) > kAlphabetSize) return std::nullopt;
  for (std::size_t i = 0; i < letters.size(); ++i) {
    if (a.index_of(letters[i]) != s + static_cast<int>(i)) return std::nullopt;
  }
  return s;
}

inline LetterString RunOf(const Alphabet& a, int start, int length) {
  LetterString out;
  for (int i = 0; i < length; ++i) out.push_back(a.at(start + i));
  return out;
}

inline LetterString ExpectRun(const Transformation& t, const Alphabet& a,
                              const LetterString& q, const LetterString& letters) {
  if (letters.size() < 2 || !RunStart(a, letters)) Malformed(t, q, "not an alphabet run");
  return letters;
}

// Removes the single adjacent duplicate.
inline LetterString RemoveAdjacentDuplicate(const Transformation& t,
                                            const LetterString& q,
                                            const LetterString& letters) {
  int found = -1;
  for (std::size_t i = 1; i < letters.size(); ++i) {
    if (letters[i] == letters[i - 1]) {
      if (found >= 0) Malformed(t, q, "more than one adjacent duplicate");
      found = static_cast<int>(i);
    }
  }
  if (found < 0) Malformed(t, q, "no adjacent duplicate");
  LetterString out = letters;
  out.erase(out.begin() + found);
  return out;
}

// Recovers the run from a copy with exactly one position replaced by a
// letter outside the run. Unique for length >= 3.
inline LetterString RepairCorruption(const Transformation& t, const Alphabet& a,
                                     const LetterString& q,
                                     const LetterString& letters) {
  const int n = static_cast<int>(letters.size());
  if (n < 3) Malformed(t, q, "corrupted run shorter than 3");
  std::optional<int> found;
  for (int s = 0; s + n <= kAlphabetSize; ++s) {
    int mismatch = -1;
    int mismatches = 0;
    for (int i = 0; i < n; ++i) {
      if (a.at(s + i) != letters[i]) {
        ++mismatches;
        mismatch = i;
      }
    }
    if (mismatches != 1) continue;
    const int idx = a.index_of(letters[mismatch]);
    if (idx >= s && idx < s + n) continue;  // corrupt letter must lie outside the run
    if (found) Malformed(t, q, "ambiguous corruption");
    found = s;
  }
  if (!found) Malformed(t, q, "no single corrupted position");
  return RunOf(a, *found, n);
}

// Splits "a x b x c" into ("a b c", x).
inline std::pair<LetterString, Letter> Deinterleave(const Transformation& t,
                                                    const LetterString& q,
                                                    const LetterString& letters) {
  if (letters.size() < 3 || letters.size() % 2 == 0) {
    Malformed(t, q, "interleaved string must have odd length >= 3");
  }
  const Letter x = letters[1];
  LetterString kept;
  for (std::size_t i = 0; i < letters.size(); ++i) {
    if (i % 2 == 1) {
      if (letters[i] != x) Malformed(t, q, "inconsistent interleave letter");
    } else {
      if (letters[i] == x) Malformed(t, q, "interleave letter inside run");
      kept.push_back(letters[i]);
    }
  }
  return {kept, x};
}

// "a a b b" -> "a b".
inline LetterString Ungroup(const Transformation& t, const LetterString& q,
                            const LetterString& letters) {
  if (letters.size() < 4 || letters.size() % 2 != 0) Malformed(t, q, "not letter pairs");
  LetterString out;
  for (std::size_t i = 0; i < letters.size(); i += 2) {
    if (letters[i] != letters[i + 1]) Malformed(t, q, "not letter pairs");
    out.push_back(letters[i]);
  }
  return out;
}

// Orders distinct letters by alphabet position; they must form a run.
inline LetterString SortToRun(const Transformation& t, const Alphabet& a,
                              const LetterString& q, LetterString letters) {
  std::sort(letters.begin(), letters.end(), [&](Letter x, Letter y) {
    return a.index_of(x) < a.index_of(y);
  });
  return ExpectRun(t, a, q, letters);
}

inline LetterString WithLastSucc(const Alphabet& a, LetterString r) {
  r.back() = SuccessorOf(a, r.back());
  return r;
}

inline LetterString WithFirstPred(const Alphabet& a, LetterString r) {
  r.front() = PredecessorOf(a, r.front());
  return r;
}

inline LetterString Extended(const Alphabet& a, LetterString r) {
  r.push_back(SuccessorOf(a, r.back()));
  return r;
}

}  // namespace detail

// Closed-form answer of `t` applied to `query` under `alphabet`. The query is
// parsed against the transformation's input schema; decoration parameters
// (interleave letter, corrupted position, duplicate position) are recovered
// from the query itself. Only the shift offset comes from `t`.
inline LetterString OracleAnswer(const Transformation& t, const Alphabet& a,
                                 const LetterString& q) {
  using namespace detail;
  try {
    switch (t.tag) {
      case TransformTag::kExtend:
        return Extended(a, ExpectRun(t, a, q, q));
      case TransformTag::kSuccessor:
        return WithLastSucc(a, ExpectRun(t, a, q, q));
      case TransformTag::kPredecessor:
        return WithFirstPred(a, ExpectRun(t, a, q, q));
      case TransformTag::kRemoveRedundant:
        return ExpectRun(t, a, q, RemoveAdjacentDuplicate(t, q, q));
      case TransformTag::kFix:
        return RepairCorruption(t, a, q, q);
      case TransformTag::kSort: {
        std::set<Letter> distinct(q.begin(), q.end());
        if (distinct.size() != q.size()) Malformed(t, q, "repeated letters");
        return SortToRun(t, a, q, q);
      }
      case TransformTag::kSortGroup: {
        LetterString singles = Ungroup(t, q, q);
        std::set<Letter> distinct(singles.begin(), singles.end());
        if (distinct.size() != singles.size()) Malformed(t, q, "repeated pairs");
        return Doubled(SortToRun(t, a, q, singles));
      }
      case TransformTag::kRmRedInterleave: {
        auto [letters, x] = Deinterleave(t, q, q);
        return Interleave(ExpectRun(t, a, q, RemoveAdjacentDuplicate(t, q, letters)), x);
      }
      case TransformTag::kRmRedSucc:
        return WithLastSucc(a, ExpectRun(t, a, q, RemoveAdjacentDuplicate(t, q, q)));
      case TransformTag::kFixExt:
        return Extended(a, RepairCorruption(t, a, q, q));
      case TransformTag::kRmRedSort: {
        LetterString singles = RemoveAdjacentDuplicate(t, q, q);
        std::set<Letter> distinct(singles.begin(), singles.end());
        if (distinct.size() != singles.size()) Malformed(t, q, "repeated letters");
        return SortToRun(t, a, q, singles);
      }
      case TransformTag::kExtPred:
        return Extended(a, WithFirstPred(a, ExpectRun(t, a, q, q)));
      case TransformTag::kFixIL: {
        auto [letters, x] = Deinterleave(t, q, q);
        return Interleave(RepairCorruption(t, a, q, letters), x);
      }
      case TransformTag::kExtGp:
        return Doubled(Extended(a, ExpectRun(t, a, q, Ungroup(t, q, q))));
      case TransformTag::kExtExtSucc: {
        LetterString r = ExpectRun(t, a, q, q);
        const int end = a.index_of(r.back());
        r.push_back(a.at(end + 1));
        r.push_back(a.at(end + 3));
        return r;
      }
      case TransformTag::kFixPredSucc:
        return WithLastSucc(a, WithFirstPred(a, RepairCorruption(t, a, q, q)));
      case TransformTag::kReverse: {
        if (q.empty()) Malformed(t, q, "empty");
        return LetterString(q.rbegin(), q.rend());
      }
      case TransformTag::kShift: {
        if (q.empty()) Malformed(t, q, "empty");
        LetterString out;
        for (Letter l : q) out.push_back(a.at(a.index_of(l) + t.shift_offset));
        return out;
      }
      case TransformTag::kReplicate: {
        if (q.empty()) Malformed(t, q, "empty");
        LetterString out = q;
        out.insert(out.end(), q.begin(), q.end());
        return out;
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMalformedQuery) throw;
    // Boundary failures (no successor etc.) mean the query does not fit.
    throw Error(ErrorCode::kMalformedQuery, e.what());
  }
  throw Error(ErrorCode::kMalformedQuery, "unknown transformation");
}

// Samples one (input, output) pair realising `t` under `alphabet`. The output
// is built constructively from the sampled geometry, independently of
// OracleAnswer.
inline Instance MakeInstance(const Transformation& t, const Alphabet& a,
                             std::mt19937_64& rng, const SharedParams& shared = {}) {
  using namespace detail;
  const Margins m = MarginsFor(t);
  const bool interleaved = UsesInterleave(t.tag);
  if (interleaved && !shared.interleave) {
    throw Error(ErrorCode::kInapplicable, "interleave letter not provided");
  }

  Instance inst;
  InstanceSpec& spec = inst.spec;
  spec.transformation = t;
  Decoration& d = spec.decoration;

  // Geometry: length, then start, rejecting runs containing the interleave
  // letter.
  LetterString base;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000) {
      throw Error(ErrorCode::kInapplicable,
                  std::string("no valid geometry for ") + TransformName(t.tag));
    }
    const int max_len = std::min(6, kAlphabetSize - m.before - m.after);
    if (max_len < m.min_length) {
      throw Error(ErrorCode::kInapplicable,
                  std::string("alphabet too short for ") + TransformName(t.tag));
    }
    spec.base_length =
        m.min_length + static_cast<int>(UniformIndex(rng, max_len - m.min_length + 1));
    const int lo = m.before;
    const int hi = kAlphabetSize - spec.base_length - m.after;
    spec.base_start = lo + static_cast<int>(UniformIndex(rng, hi - lo + 1));
    base = Run(a, spec.base_start, spec.base_length);
    if (interleaved &&
        std::find(base.begin(), base.end(), *shared.interleave) != base.end()) {
      continue;
    }
    break;
  }
  const int L = spec.base_length;
  const int s = spec.base_start;

  auto with_duplicate = [&](const LetterString& letters) {
    d.dup_pos = static_cast<int>(UniformIndex(rng, letters.size()));
    LetterString out = letters;
    out.insert(out.begin() + d.dup_pos + 1, letters[d.dup_pos]);
    return out;
  };
  auto corrupted = [&](const LetterString& letters) {
    d.fix_pos = static_cast<int>(UniformIndex(rng, letters.size()));
    std::vector<Letter> pool;
    for (int id = 0; id < kAlphabetSize; ++id) {
      Letter c(id);
      if (std::find(letters.begin(), letters.end(), c) != letters.end()) continue;
      if (shared.interleave && c == *shared.interleave) continue;
      pool.push_back(c);
    }
    d.fix_letter = pool[UniformIndex(rng, pool.size())];
    LetterString out = letters;
    out[d.fix_pos] = *d.fix_letter;
    return out;
  };
  auto shuffled = [&](const LetterString& letters) {
    d.shuffle = RandomPermutation(rng, static_cast<int>(letters.size()), true);
    LetterString out;
    for (int i : d.shuffle) out.push_back(letters[i]);
    return out;
  };
  auto next = [&](int k) { return a.at(s + L - 1 + k); };

  LetterString in;
  LetterString out;
  switch (t.tag) {
    case TransformTag::kExtend:
      in = base;
      out = RunOf(a, s, L + 1);
      break;
    case TransformTag::kSuccessor:
      in = base;
      out = base;
      out.back() = next(1);
      break;
    case TransformTag::kPredecessor:
      in = base;
      out = base;
      out.front() = a.at(s - 1);
      break;
    case TransformTag::kRemoveRedundant:
      in = with_duplicate(base);
      out = base;
      break;
    case TransformTag::kFix:
      in = corrupted(base);
      out = base;
      break;
    case TransformTag::kSort:
      in = shuffled(base);
      out = base;
      break;
    case TransformTag::kSortGroup:
      d.group_multiplicity = 2;
      in = Doubled(shuffled(base));
      out = Doubled(base);
      break;
    case TransformTag::kRmRedInterleave:
      d.interleave = shared.interleave;
      in = Interleave(with_duplicate(base), *shared.interleave);
      out = Interleave(base, *shared.interleave);
      break;
    case TransformTag::kRmRedSucc:
      in = with_duplicate(base);
      out = base;
      out.back() = next(1);
      break;
    case TransformTag::kFixExt:
      in = corrupted(base);
      out = base;
      out.push_back(next(1));
      break;
    case TransformTag::kRmRedSort:
      in = with_duplicate(shuffled(base));
      out = base;
      break;
    case TransformTag::kExtPred:
      in = base;
      out = base;
      out.front() = a.at(s - 1);
      out.push_back(next(1));
      break;
    case TransformTag::kFixIL:
      d.interleave = shared.interleave;
      in = Interleave(corrupted(base), *shared.interleave);
      out = Interleave(base, *shared.interleave);
      break;
    case TransformTag::kExtGp:
      d.group_multiplicity = 2;
      in = Doubled(base);
      out = Doubled(RunOf(a, s, L + 1));
      break;
    case TransformTag::kExtExtSucc:
      in = base;
      out = base;
      out.push_back(next(1));
      out.push_back(next(3));
      break;
    case TransformTag::kFixPredSucc:
      in = corrupted(base);
      out = base;
      out.front() = a.at(s - 1);
      out.back() = next(1);
      break;
    case TransformTag::kReverse:
      in = base;
      out.assign(base.rbegin(), base.rend());
      break;
    case TransformTag::kShift:
      d.shift_offset = t.shift_offset;
      in = base;
      for (int i = 0; i < L; ++i) out.push_back(a.at(s + i + t.shift_offset));
      break;
    case TransformTag::kReplicate:
      in = base;
      out = base;
      out.insert(out.end(), base.begin(), base.end());
      break;
  }
  inst.input = std::move(in);
  inst.output = std::move(out);
  return inst;
}

struct ExamplePair {
  LetterString input;
  LetterString output;

  friend bool operator==(const ExamplePair&, const ExamplePair&) = default;
};

enum class AlphabetSet { kSeen, kNew };

inline const char* AlphabetSetName(AlphabetSet s) {
  return s == AlphabetSet::kSeen ? "seen" : "new";
}

struct AnalogyTask {
  std::uint64_t id = 0;
  Alphabet alphabet;
  int alphabet_ref = -1;  // index into the owning pool, -1 when ad hoc
  AlphabetSet alphabet_set = AlphabetSet::kSeen;
  std::vector<ExamplePair> examples;
  LetterString query;
  LetterString target;
  Transformation transformation;
  bool is_copy = false;
  std::string split;
};

inline constexpr int kQueryRetryBudget = 100;
inline constexpr int kExampleResampleBudget = 20;

// Builds one analogy task. Examples and query are independent instances of
// the same transformation on the same alphabet; only the interleave letter
// (and the shift offset carried by `t`) is shared.
inline AnalogyTask BuildTask(const Transformation& t, const Alphabet& alphabet,
                             std::mt19937_64& rng, int n_examples, bool is_copy) {
  if (n_examples < 1 || n_examples > 5) {
    throw Error(ErrorCode::kInvalidConfig,
                "n_examples must be in 1..5, got " + std::to_string(n_examples));
  }
  AnalogyTask task;
  task.alphabet = alphabet;
  task.transformation = t;
  task.is_copy = is_copy;

  SharedParams shared;
  if (detail::UsesInterleave(t.tag)) {
    shared.interleave = Letter(static_cast<int>(UniformIndex(rng, kAlphabetSize)));
  }

  for (int round = 0; round < kExampleResampleBudget; ++round) {
    task.examples.clear();
    for (int e = 0; e < n_examples; ++e) {
      Instance inst = MakeInstance(t, alphabet, rng, shared);
      task.examples.push_back({std::move(inst.input), std::move(inst.output)});
    }
    if (is_copy) {
      task.query = task.examples[0].input;
      task.target = task.examples[0].output;
      return task;
    }
    for (int attempt = 0; attempt < kQueryRetryBudget; ++attempt) {
      Instance q = MakeInstance(t, alphabet, rng, shared);
      const bool differs = std::none_of(
          task.examples.begin(), task.examples.end(),
          [&](const ExamplePair& ex) { return ex.input == q.input; });
      if (differs) {
        task.query = std::move(q.input);
        task.target = std::move(q.output);
        return task;
      }
    }
  }
  throw Error(ErrorCode::kExhaustedSampling,
              std::string("no differing query for ") + TransformName(t.tag));
}

// ---------------------------------------------------------------------------
// Alphabet pools

// N alphabets, N/5 per permutation level. The level-0 slot holds only the
// standard order; its remaining slots are filled at level 2. Orders never
// repeat within a pool or collide with `exclude`.
inline std::vector<Alphabet> BuildAlphabetPool(int size, std::uint64_t seed,
                                               const std::vector<Alphabet>& exclude = {},
                                               bool include_standard = true) {
  if (size < 5 || size % 5 != 0) {
    throw Error(ErrorCode::kInvalidConfig,
                "alphabet pool size must be a positive multiple of 5, got " +
                    std::to_string(size));
  }
  const int per_level = size / 5;
  std::vector<Alphabet> pool;
  std::set<std::string> used;
  for (const Alphabet& a : exclude) used.insert(a.ToString());

  std::uint64_t counter = 0;
  auto draw = [&](int k) {
    for (;;) {
      const std::uint64_t s = MixSeed(seed, counter++);
      Alphabet a = PermuteAlphabet(Alphabet::Standard(), k, s);
      if (used.insert(a.ToString()).second) return a;
    }
  };

  for (int k : kPermutationLevels) {
    int slots = per_level;
    int level = k;
    if (k == 0) {
      if (include_standard && used.insert(Alphabet::Standard().ToString()).second) {
        pool.push_back(Alphabet::Standard());
        --slots;
      }
      level = 2;
    }
    for (int i = 0; i < slots; ++i) pool.push_back(draw(level));
  }
  return pool;
}

// Alphabets for the new-alphabet suites: 20 fresh orders, seeds from a
// stream disjoint from the training pool.
inline std::vector<Alphabet> BuildNewAlphabets(const std::vector<Alphabet>& pool,
                                               std::uint64_t seed, int count = 20) {
  return BuildAlphabetPool(count, MixSeed(seed, 0xA1FAB37ull), pool,
                           /*include_standard=*/false);
}

// ---------------------------------------------------------------------------
// Datasets

struct DatasetConfig {
  int alphabet_pool_size = 20;
  bool include_copy = false;
  int n_examples = 1;
  int n_train = 180000;
  int n_val = 25000;
  int n_test = 25000;
  int n_ood = 25000;  // size of each out-of-distribution suite
  int shift_offset = 3;
  std::uint64_t seed = 1;

  // 230k tasks without copy tasks; ~400k with half copy tasks.
  static DatasetConfig Default(bool include_copy) {
    DatasetConfig c;
    c.include_copy = include_copy;
    if (include_copy) c.n_train = 350000;
    return c;
  }

  void Validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
    if (alphabet_pool_size < 5 || alphabet_pool_size % 5 != 0) {
      fail("alphabet_pool_size must be a positive multiple of 5");
    }
    if (n_examples < 1 || n_examples > 5) fail("n_examples must be in 1..5");
    if (n_train < 0 || n_val < 0 || n_test < 0 || n_ood < 0) fail("split sizes must be >= 0");
    if (shift_offset < 1 || shift_offset > 19) fail("shift_offset must be in 1..19");
  }
};

inline constexpr const char* kSplitTrain = "train";
inline constexpr const char* kSplitVal = "val";
inline constexpr const char* kSplitTest = "test_id";
inline constexpr const char* kSuiteNewAlphabet = "ood_alphabet";
inline constexpr const char* kSuiteNewTransform = "ood_transform";
inline constexpr const char* kSuiteNewBoth = "ood_transform_alphabet";

struct Dataset {
  DatasetConfig config;
  std::vector<Alphabet> pool;
  std::vector<Alphabet> new_alphabets;
  std::map<std::string, std::vector<AnalogyTask>> splits;
};

namespace detail {

inline std::uint64_t SplitStream(const std::string& split) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : split) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
  return h;
}

inline std::vector<AnalogyTask> GenerateSplit(const DatasetConfig& config,
                                              const std::string& split, int count,
                                              const std::vector<Alphabet>& alphabets,
                                              AlphabetSet alphabet_set,
                                              const std::vector<TransformTag>& tags,
                                              bool allow_copy) {
  std::vector<AnalogyTask> out;
  out.reserve(count);
  const std::uint64_t split_seed = MixSeed(config.seed, SplitStream(split));
  for (int i = 0; i < count; ++i) {
    // Each task owns its generator stream, so tasks are reproducible from
    // (seed, split, index) alone.
    std::mt19937_64 rng(MixSeed(split_seed, static_cast<std::uint64_t>(i)));
    Transformation t;
    t.tag = tags[UniformIndex(rng, tags.size())];
    t.shift_offset = config.shift_offset;
    const int alpha = static_cast<int>(UniformIndex(rng, alphabets.size()));
    const bool is_copy = allow_copy && config.include_copy && (i % 2 == 1);
    AnalogyTask task = BuildTask(t, alphabets[alpha], rng, config.n_examples, is_copy);
    task.id = static_cast<std::uint64_t>(i);
    task.alphabet_ref = alpha;
    task.alphabet_set = alphabet_set;
    task.split = split;
    out.push_back(std::move(task));
  }
  return out;
}

}  // namespace detail

// Generates the alphabet pool, the three in-distribution splits and the three
// out-of-distribution suites. Deterministic under config.seed.
inline Dataset BuildDataset(const DatasetConfig& config, bool with_ood = true) {
  config.Validate();
  Dataset ds;
  ds.config = config;
  ds.pool = BuildAlphabetPool(config.alphabet_pool_size, config.seed);
  ds.new_alphabets = BuildNewAlphabets(ds.pool, config.seed);

  const auto seen = TransformsIn(TransformSplit::kSeen);
  std::vector<TransformTag> unseen = TransformsIn(TransformSplit::kCompositional);
  for (TransformTag t : TransformsIn(TransformSplit::kNovel)) unseen.push_back(t);

  using detail::GenerateSplit;
  ds.splits[kSplitTrain] = GenerateSplit(config, kSplitTrain, config.n_train, ds.pool,
                                         AlphabetSet::kSeen, seen, true);
  ds.splits[kSplitVal] = GenerateSplit(config, kSplitVal, config.n_val, ds.pool,
                                       AlphabetSet::kSeen, seen, true);
  ds.splits[kSplitTest] = GenerateSplit(config, kSplitTest, config.n_test, ds.pool,
                                        AlphabetSet::kSeen, seen, true);
  if (with_ood) {
    ds.splits[kSuiteNewAlphabet] =
        GenerateSplit(config, kSuiteNewAlphabet, config.n_ood, ds.new_alphabets,
                      AlphabetSet::kNew, seen, false);
    ds.splits[kSuiteNewTransform] = GenerateSplit(
        config, kSuiteNewTransform, config.n_ood, ds.pool, AlphabetSet::kSeen, unseen, false);
    ds.splits[kSuiteNewBoth] =
        GenerateSplit(config, kSuiteNewBoth, config.n_ood, ds.new_alphabets,
                      AlphabetSet::kNew, unseen, false);
  }
  return ds;
}

}  // namespace analogy
