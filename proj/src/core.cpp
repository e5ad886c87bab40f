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
#include "metasense/core.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "metasense/error.hpp"
#include "metasense/parallel.hpp"

namespace metasense {

SenseId::SenseId(std::string value) : value_(std::move(value)) {}

std::string SenseId::lemma() const {
  const auto pct = value_.find('%');
  return pct == std::string::npos ? value_ : value_.substr(0, pct);
}

SenseInventory::SenseInventory(std::vector<SenseId> senses,
                               std::map<std::string, std::vector<SenseId>> lemma_index)
    : senses_(std::move(senses)), lemma_index_(std::move(lemma_index)) {
  std::sort(senses_.begin(), senses_.end());
  for (std::size_t i = 0; i < senses_.size(); ++i) {
    if (senses_[i].str().empty()) fail(ErrorCode::kInvalidArgument, "empty sense id");
    if (i > 0 && senses_[i] == senses_[i - 1]) {
      fail(ErrorCode::kDuplicateSense, senses_[i].str());
    }
    position_.emplace(senses_[i], i);
  }
  for (auto& [lemma, cands] : lemma_index_) {
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    for (const auto& s : cands) {
      if (!position_.contains(s)) {
        fail(ErrorCode::kUnknownSense, "lemma '" + lemma + "' lists " + s.str());
      }
    }
  }
}

SenseInventory SenseInventory::from_sense_keys(std::vector<SenseId> senses) {
  std::sort(senses.begin(), senses.end());
  senses.erase(std::unique(senses.begin(), senses.end()), senses.end());
  std::map<std::string, std::vector<SenseId>> index;
  for (const auto& s : senses) index[s.lemma()].push_back(s);
  return SenseInventory(std::move(senses), std::move(index));
}

std::optional<std::size_t> SenseInventory::index_of(const SenseId& s) const {
  const auto it = position_.find(s);
  if (it == position_.end()) return std::nullopt;
  return it->second;
}

std::span<const SenseId> SenseInventory::candidates(const std::string& lemma) const {
  const auto it = lemma_index_.find(lemma);
  if (it == lemma_index_.end()) return {};
  return it->second;
}

SourceEmbeddingSet::SourceEmbeddingSet(std::string name, std::size_t dim,
                                       std::vector<SenseId> ids, std::vector<float> rows)
    : name_(std::move(name)), dim_(dim), ids_(std::move(ids)), rows_(std::move(rows)) {
  if (dim_ == 0) fail(ErrorCode::kDimMismatch, "embedding dimensionality must be positive");
  if (rows_.size() != ids_.size() * dim_) {
    fail(ErrorCode::kDimMismatch, std::to_string(rows_.size()) + " values for " +
                                      std::to_string(ids_.size()) + " rows of dim " +
                                      std::to_string(dim_));
  }
  for (float v : rows_) {
    if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, "non-finite embedding value");
  }
  coverage_.reserve(ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (ids_[r].str().empty()) fail(ErrorCode::kInvalidArgument, "empty sense id");
    if (!coverage_.emplace(ids_[r], r).second) {
      fail(ErrorCode::kDuplicateSense, ids_[r].str());
    }
  }
}

std::optional<std::size_t> SourceEmbeddingSet::find(const SenseId& s) const {
  const auto it = coverage_.find(s);
  if (it == coverage_.end()) return std::nullopt;
  return it->second;
}

const float* SourceEmbeddingSet::vector(const SenseId& s) const {
  const auto r = find(s);
  return r ? rows_.data() + *r * dim_ : nullptr;
}

std::optional<std::size_t> AlignmentIndex::position(const SenseId& s) const {
  const auto it = position_.find(s);
  if (it == position_.end()) return std::nullopt;
  return it->second;
}

AlignmentIndex build_alignment(const SenseInventory& inventory,
                               std::span<const SourceEmbeddingSet> sources) {
  if (sources.empty()) fail(ErrorCode::kInvalidArgument, "no source embeddings");
  for (const auto& src : sources) {
    for (const auto& s : src.ids()) {
      if (!inventory.contains(s)) {
        fail(ErrorCode::kUnknownSense, "source '" + src.name() + "' covers " + s.str());
      }
    }
  }

  const std::size_t n = sources.size();
  AlignmentIndex index;
  index.per_source_.resize(n);
  index.stats_.per_source.resize(n);
  for (std::size_t j = 0; j < n; ++j) index.stats_.per_source[j] = sources[j].size();

  std::vector<std::size_t> rows(n);
  for (const auto& s : inventory.senses()) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto r = sources[j].find(s);
      rows[j] = r.value_or(kMissing);
      k += r.has_value();
    }
    if (k == 0) {
      index.stats_.uncovered.push_back(s);
      continue;
    }
    const std::size_t pos = index.senses_.size();
    index.senses_.push_back(s);
    index.position_.emplace(s, pos);
    index.rows_.insert(index.rows_.end(), rows.begin(), rows.end());
    index.available_.push_back(k);
    for (std::size_t j = 0; j < n; ++j) {
      if (rows[j] != kMissing) index.per_source_[j].push_back(pos);
    }
    if (k == n) ++index.stats_.intersection_size;
  }
  if (index.senses_.empty()) fail(ErrorCode::kEmptyUnion, "sources cover no senses");
  index.stats_.union_size = index.senses_.size();
  return index;
}

MetaModel::MetaModel(std::size_t d, std::vector<DenseMatrix> projections,
                     std::vector<std::string> source_names)
    : d_(d), projections_(std::move(projections)), names_(std::move(source_names)) {
  if (projections_.empty()) fail(ErrorCode::kInvalidArgument, "model has no projections");
  if (d_ == 0) fail(ErrorCode::kInvalidArgument, "output dimensionality must be positive");
  if (names_.size() != projections_.size()) {
    fail(ErrorCode::kInvalidArgument, "one source name per projection required");
  }
  for (std::size_t j = 0; j < projections_.size(); ++j) {
    const auto& p = projections_[j];
    if (p.rows() != d_ || p.cols() == 0) {
      fail(ErrorCode::kInvalidArgument, "projection " + std::to_string(j) + " has " +
                                            std::to_string(p.rows()) + " rows, expected " +
                                            std::to_string(d_));
    }
    if (!p.all_finite()) {
      fail(ErrorCode::kInvalidArgument, "projection " + std::to_string(j) + " is not finite");
    }
  }
}

MetaModel MetaModel::identity(std::size_t d, std::span<const SourceEmbeddingSet> sources) {
  std::vector<DenseMatrix> ps;
  std::vector<std::string> names;
  for (const auto& src : sources) {
    ps.push_back(DenseMatrix::rectangular_identity(d, src.dim()));
    names.push_back(src.name());
  }
  return MetaModel(d, std::move(ps), std::move(names));
}

void MetaModel::check_compatible(std::span<const SourceEmbeddingSet> sources) const {
  if (sources.size() != projections_.size()) {
    fail(ErrorCode::kDimMismatch, "model has " + std::to_string(projections_.size()) +
                                      " projections but " + std::to_string(sources.size()) +
                                      " sources were given");
  }
  for (std::size_t j = 0; j < sources.size(); ++j) {
    if (projections_[j].cols() != sources[j].dim()) {
      fail(ErrorCode::kDimMismatch, "source " + std::to_string(j) + " ('" + sources[j].name() +
                                        "') has dim " + std::to_string(sources[j].dim()) +
                                        ", projection expects " +
                                        std::to_string(projections_[j].cols()));
    }
  }
}

std::vector<double> encode_meta(const MetaModel& model, std::size_t pos,
                                std::span<const SourceEmbeddingSet> sources,
                                const AlignmentIndex& alignment) {
  const std::size_t d = model.dim();
  std::vector<double> out(d, 0.0);
  std::size_t k = 0;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const std::size_t r = alignment.row(pos, j);
    if (r == kMissing) continue;
    ++k;
    const auto x = sources[j].row(r);
    const auto& p = model.projection(j);
    for (std::size_t i = 0; i < d; ++i) {
      const auto prow = p.row(i);
      double acc = 0.0;
      for (std::size_t c = 0; c < x.size(); ++c) acc += prow[c] * static_cast<double>(x[c]);
      out[i] += acc;
    }
  }
  if (k == 0) fail(ErrorCode::kSenseUncovered, alignment.sense(pos).str());
  const double inv = 1.0 / static_cast<double>(k);
  for (double& v : out) v *= inv;
  return out;
}

std::vector<double> encode_meta(const MetaModel& model, const SenseId& sense,
                                std::span<const SourceEmbeddingSet> sources,
                                const AlignmentIndex& alignment) {
  model.check_compatible(sources);
  const auto pos = alignment.position(sense);
  if (!pos) fail(ErrorCode::kSenseUncovered, sense.str());
  return encode_meta(model, *pos, sources, alignment);
}

DenseMatrix encode_rows(const MetaModel& model, std::span<const std::size_t> positions,
                        std::span<const SourceEmbeddingSet> sources,
                        const AlignmentIndex& alignment) {
  model.check_compatible(sources);
  DenseMatrix out(positions.size(), model.dim());
  parallel_for(0, positions.size(), [&](std::size_t i) {
    const auto v = encode_meta(model, positions[i], sources, alignment);
    std::copy(v.begin(), v.end(), out.row(i).begin());
  });
  return out;
}

SourceEmbeddingSet materialize(const MetaModel& model,
                               std::span<const SourceEmbeddingSet> sources,
                               const AlignmentIndex& alignment) {
  model.check_compatible(sources);
  const std::size_t d = model.dim();
  std::vector<float> rows(alignment.size() * d);
  parallel_for(0, alignment.size(), [&](std::size_t pos) {
    assert(alignment.available_count(pos) >= 1);
    const auto v = encode_meta(model, pos, sources, alignment);
    for (std::size_t i = 0; i < d; ++i) rows[pos * d + i] = static_cast<float>(v[i]);
  });
  return SourceEmbeddingSet("meta", d, {alignment.senses().begin(), alignment.senses().end()},
                            std::move(rows));
}

DenseMatrix to_dense(const SourceEmbeddingSet& set) {
  std::vector<double> data(set.data().begin(), set.data().end());
  return DenseMatrix(set.size(), set.dim(), std::move(data));
}

}  // namespace metasense
