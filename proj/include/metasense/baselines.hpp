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

#include <cstdint>
#include <span>
#include <vector>

#include "metasense/core.hpp"
#include "metasense/linalg.hpp"

namespace metasense {

struct CombineOptions {
  // L2-normalise every source vector before combining.
  bool normalize_inputs = false;
};

/// Zero-pads every source to the largest dimensionality and averages over the
/// sources that cover each sense.
SourceEmbeddingSet meta_avg(std::span<const SourceEmbeddingSet> sources,
                            const AlignmentIndex& alignment, const CombineOptions& options = {});

/// Concatenates source vectors in source order; a missing sense contributes a
/// zero segment.
SourceEmbeddingSet meta_conc(std::span<const SourceEmbeddingSet> sources,
                             const AlignmentIndex& alignment, const CombineOptions& options = {});

/// Rows U_k S_k of the truncated SVD of the concatenation.
/// Throws kRankTooLarge when k exceeds min(senses, sum of dims).
SourceEmbeddingSet meta_svd(std::span<const SourceEmbeddingSet> sources,
                            const AlignmentIndex& alignment, std::size_t k, std::uint64_t seed,
                            const CombineOptions& options = {});

/// The concatenated matrix used by meta_conc and meta_svd, in double precision.
DenseMatrix concatenated_matrix(std::span<const SourceEmbeddingSet> sources,
                                const AlignmentIndex& alignment, const CombineOptions& options = {});

enum class AemeInit { kRandom, kIdentity };

struct AemeConfig {
  std::size_t latent_dim = 2048;
  std::size_t steps = 1000;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  std::vector<double> source_weights;  // empty means 1 for every source
  std::size_t checkpoint_every = 100;
  AemeInit init = AemeInit::kRandom;
  bool normalize_inputs = false;
};

/// Linear averaged autoencoder: encoder E_j (latent x d_j), decoder D_j
/// (d_j x latent) per source.
struct AemeModel {
  std::size_t latent_dim = 0;
  std::vector<DenseMatrix> encoders;
  std::vector<DenseMatrix> decoders;
  std::vector<double> weights;
};

struct AemeResult {
  AemeModel model;
  SourceEmbeddingSet embeddings;
  // Mean per-sense reconstruction loss before training and after every
  // checkpoint_every steps.
  std::vector<double> checkpoints;
};

/// Full-batch gradient descent on sum_j w_j ||x_j - D_j E_j x_j||^2, averaged
/// over aligned senses. Throws kDivergedLoss on a non-finite loss.
AemeResult train_aeme(std::span<const SourceEmbeddingSet> sources,
                      const AlignmentIndex& alignment, const AemeConfig& config);

/// Mean reconstruction loss of the model on the aligned senses.
double aeme_loss(const AemeModel& model, std::span<const SourceEmbeddingSet> sources,
                 const AlignmentIndex& alignment, bool normalize_inputs = false);

/// Unit-norm average of the encoded source vectors for every aligned sense.
SourceEmbeddingSet aeme_encode(const AemeModel& model,
                               std::span<const SourceEmbeddingSet> sources,
                               const AlignmentIndex& alignment, bool normalize_inputs = false);

}  // namespace metasense
