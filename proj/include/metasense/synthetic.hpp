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

// Seeded synthetic worlds and brute-force reference implementations.
//
// Every sense gets a random unit latent vector. Source j stores
// R_j * pad(latent) + noise, where R_j is a random orthogonal d_j x d_j
// matrix; contexts store pad(latent) + noise in the context space. With zero
// noise all sources are exact rotations of one another, so their PIP matrices
// coincide.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metasense/core.hpp"
#include "metasense/linalg.hpp"
#include "metasense/storage.hpp"

namespace metasense {

struct SourceSpec {
  std::string name;
  std::size_t dim = 0;  // >= latent_dim
  // Expected norm of the noise vector added to each unit-norm sense vector.
  double noise_sigma = 0.0;
  double coverage_fraction = 1.0;  // in (0, 1]
  bool rotate = true;
};

struct WorldSpec {
  std::uint64_t seed = 0;
  std::size_t n_words = 10;
  std::size_t min_senses = 2;
  std::size_t max_senses = 3;
  std::size_t latent_dim = 8;
  std::size_t context_dim = 0;  // 0 means latent_dim
  std::size_t contexts_per_sense = 2;
  double context_noise_sigma = 0.0;
  double eval_fraction = 0.2;
  std::vector<SourceSpec> sources;

  /// Throws kInvalidArgument.
  void validate() const;
};

/// Reads a JSON spec. Unknown keys are rejected. Throws kParseError,
/// kInvalidArgument.
WorldSpec parse_world_spec(std::string_view json);

struct SyntheticWorld {
  SenseInventory inventory;
  std::vector<SourceEmbeddingSet> sources;
  ContextDataset train;
  ContextDataset eval;  // held-out contexts
  DenseMatrix latents;  // inventory order
  std::vector<DenseMatrix> rotations;
};

/// Deterministic per spec. Source coverage sets are cyclic windows over a
/// shuffled sense order, so their union is the whole inventory whenever the
/// windows reach around; otherwise kInvalidArgument.
SyntheticWorld gen_world(const WorldSpec& spec);

/// Random orthogonal n x n matrix: QR of a Gaussian matrix with R's diagonal
/// made positive.
DenseMatrix random_orthogonal(std::size_t n, std::uint64_t seed);

/// Writes <source>.txt files, train.tsv, eval.tsv, and sizes.tsv
/// ("name<TAB>count" lines, sources then datasets).
void persist_world(const SyntheticWorld& world, const std::filesystem::path& dir);

/// Dense, unbatched PIP loss over all aligned senses. Throws kTooLarge above
/// 2000 senses.
double oracle_pip_loss(std::span<const SourceEmbeddingSet> sources, const MetaModel& model,
                       const AlignmentIndex& alignment);

/// Central differences of `loss` w.r.t. every projection entry. Throws
/// kTooLarge above 500 parameters.
std::vector<DenseMatrix> oracle_grad_fd(const std::function<double(const MetaModel&)>& loss,
                                        const MetaModel& model, double h = 1e-5);

/// Exhaustive cosine argmax over the covered candidates; the first maximum
/// wins, and the first candidate is returned when none is covered.
SenseId oracle_1nn(const SourceEmbeddingSet& senses, std::span<const float> context,
                   std::span<const SenseId> candidates);

}  // namespace metasense
