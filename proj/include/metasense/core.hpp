// Copyright 2026 The metasense Authors
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

#include <compare>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "metasense/linalg.hpp"

namespace metasense {

/// Opaque sense key, e.g. a WordNet sense key "bank%1:14:00::". Ordering and
/// equality are plain byte comparisons.
class SenseId {
 public:
  SenseId() = default;
  explicit SenseId(std::string value);

  const std::string& str() const noexcept { return value_; }
  // Text before the first '%', or the whole key when there is none.
  std::string lemma() const;

  auto operator<=>(const SenseId&) const = default;

 private:
  std::string value_;
};

}  // namespace metasense

template <>
struct std::hash<metasense::SenseId> {
  std::size_t operator()(const metasense::SenseId& s) const noexcept {
    return std::hash<std::string>{}(s.str());
  }
};

namespace metasense {

/// The universe of senses plus the word -> candidate senses map. Senses are
/// kept in byte-lexicographic order, which fixes every row index downstream.
class SenseInventory {
 public:
  SenseInventory() = default;
  SenseInventory(std::vector<SenseId> senses,
                 std::map<std::string, std::vector<SenseId>> lemma_index);

  /// Builds an inventory whose lemma index groups keys by SenseId::lemma().
  static SenseInventory from_sense_keys(std::vector<SenseId> senses);

  std::span<const SenseId> senses() const noexcept { return senses_; }
  std::size_t size() const noexcept { return senses_.size(); }
  std::optional<std::size_t> index_of(const SenseId& s) const;
  bool contains(const SenseId& s) const { return index_of(s).has_value(); }

  /// Candidate senses of a word in inventory order; empty when unknown.
  std::span<const SenseId> candidates(const std::string& lemma) const;
  const std::map<std::string, std::vector<SenseId>>& lemma_index() const noexcept {
    return lemma_index_;
  }

 private:
  std::vector<SenseId> senses_;
  std::unordered_map<SenseId, std::size_t> position_;
  std::map<std::string, std::vector<SenseId>> lemma_index_;
};

/// One pretrained embedding set: a float matrix with one row per covered sense.
class SourceEmbeddingSet {
 public:
  SourceEmbeddingSet() = default;
  /// Throws kDuplicateSense, kDimMismatch, or kInvalidArgument (empty id or
  /// non-finite value).
  SourceEmbeddingSet(std::string name, std::size_t dim, std::vector<SenseId> ids,
                     std::vector<float> rows);

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }

  std::span<const SenseId> ids() const noexcept { return ids_; }
  std::span<const float> data() const noexcept { return rows_; }
  std::span<const float> row(std::size_t r) const { return {rows_.data() + r * dim_, dim_}; }

  std::optional<std::size_t> find(const SenseId& s) const;
  const float* vector(const SenseId& s) const;

  bool operator==(const SourceEmbeddingSet& o) const {
    return name_ == o.name_ && dim_ == o.dim_ && ids_ == o.ids_ && rows_ == o.rows_;
  }

 private:
  std::string name_;
  std::size_t dim_ = 0;
  std::vector<SenseId> ids_;
  std::vector<float> rows_;
  std::unordered_map<SenseId, std::size_t> coverage_;
};

inline constexpr std::size_t kMissing = std::numeric_limits<std::size_t>::max();

struct AlignmentStats {
  std::size_t union_size = 0;
  std::vector<std::size_t> per_source;
  std::size_t intersection_size = 0;
  // Inventory senses no source covers; they are left out of the index.
  std::vector<SenseId> uncovered;
};

/// Row lookup for every sense covered by at least one source. Positions follow
/// inventory order restricted to the union of coverages.
class AlignmentIndex {
 public:
  std::size_t size() const noexcept { return senses_.size(); }
  std::size_t source_count() const noexcept { return per_source_.size(); }

  std::span<const SenseId> senses() const noexcept { return senses_; }
  const SenseId& sense(std::size_t pos) const { return senses_[pos]; }
  std::optional<std::size_t> position(const SenseId& s) const;

  /// Row of `pos` in source j, or kMissing.
  std::size_t row(std::size_t pos, std::size_t j) const { return rows_[pos * source_count() + j]; }
  std::size_t available_count(std::size_t pos) const { return available_[pos]; }
  /// Positions covered by source j, ascending.
  std::span<const std::size_t> covered_by(std::size_t j) const { return per_source_[j]; }

  const AlignmentStats& stats() const noexcept { return stats_; }

 private:
  friend AlignmentIndex build_alignment(const SenseInventory&,
                                        std::span<const SourceEmbeddingSet>);

  std::vector<SenseId> senses_;
  std::unordered_map<SenseId, std::size_t> position_;
  std::vector<std::size_t> rows_;  // size() x source_count()
  std::vector<std::size_t> available_;
  std::vector<std::vector<std::size_t>> per_source_;
  AlignmentStats stats_;
};

/// Throws kInvalidArgument (no sources), kUnknownSense, kEmptyUnion.
AlignmentIndex build_alignment(const SenseInventory& inventory,
                               std::span<const SourceEmbeddingSet> sources);

/// Learned projections P_j (d x d_j), one per source, in source order.
class MetaModel {
 public:
  MetaModel() = default;
  /// Throws kInvalidArgument on an empty list, mismatched names, wrong shapes,
  /// or non-finite entries.
  MetaModel(std::size_t d, std::vector<DenseMatrix> projections,
            std::vector<std::string> source_names);

  /// Rectangular identity projections for the given sources.
  static MetaModel identity(std::size_t d, std::span<const SourceEmbeddingSet> sources);

  std::size_t dim() const noexcept { return d_; }
  std::size_t source_count() const noexcept { return projections_.size(); }
  const DenseMatrix& projection(std::size_t j) const { return projections_[j]; }
  DenseMatrix& projection(std::size_t j) { return projections_[j]; }
  std::span<const DenseMatrix> projections() const noexcept { return projections_; }
  std::span<const std::string> source_names() const noexcept { return names_; }

  /// Throws kDimMismatch unless this model was built for exactly these sources.
  void check_compatible(std::span<const SourceEmbeddingSet> sources) const;

  bool operator==(const MetaModel&) const = default;

 private:
  std::size_t d_ = 0;
  std::vector<DenseMatrix> projections_;
  std::vector<std::string> names_;
};

/// Average of P_j x_j(s) over the k sources covering the sense at `pos`.
std::vector<double> encode_meta(const MetaModel& model, std::size_t pos,
                                std::span<const SourceEmbeddingSet> sources,
                                const AlignmentIndex& alignment);

/// Throws kSenseUncovered when the sense is not in the alignment.
std::vector<double> encode_meta(const MetaModel& model, const SenseId& sense,
                                std::span<const SourceEmbeddingSet> sources,
                                const AlignmentIndex& alignment);

/// Meta vectors of the given alignment positions as rows of a double matrix.
DenseMatrix encode_rows(const MetaModel& model, std::span<const std::size_t> positions,
                        std::span<const SourceEmbeddingSet> sources,
                        const AlignmentIndex& alignment);

/// Embedding set "meta" with one row per aligned sense, in alignment order.
SourceEmbeddingSet materialize(const MetaModel& model,
                               std::span<const SourceEmbeddingSet> sources,
                               const AlignmentIndex& alignment);

/// Promotes a float embedding set to a double matrix (row order preserved).
DenseMatrix to_dense(const SourceEmbeddingSet& set);

}  // namespace metasense
