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

#include <cstddef>
#include <span>
#include <vector>

#include "metasense/core.hpp"
#include "metasense/linalg.hpp"
#include "metasense/storage.hpp"

namespace metasense {

/// Repeats f until it reaches target_dim. Concatenated copies of a context
/// vector have inner product sum_j <x_j, f> with a concatenated sense vector.
/// Throws kNotAMultiple.
std::vector<double> tile_context(std::span<const float> f, std::size_t target_dim);
std::vector<double> tile_context(std::span<const double> f, std::size_t target_dim);

enum class ProjectionSolver { kClosedForm, kGradientDescent };

struct ProjectionOptions {
  double lambda = 1e-3;
  ProjectionSolver solver = ProjectionSolver::kClosedForm;
  // Only used by kGradientDescent.
  std::size_t steps = 2000;
  double learning_rate = 0.1;
};

/// Fits A (d_c x d_meta) minimising sum ||A m(s) - f(w;c)||^2 + lambda ||A||_F^2
/// over the labeled instances (first gold key of each). Unlabeled instances
/// are ignored. Throws kSenseUncovered, kSingularSystem, kInvalidArgument
/// (no labeled instances).
DenseMatrix learn_context_projection(const SourceEmbeddingSet& meta,
                                     const ContextDataset& dataset,
                                     const ProjectionOptions& options = {});

/// The ridge objective above, for optimality checks.
double projection_objective(const DenseMatrix& a, const SourceEmbeddingSet& meta,
                            const ContextDataset& dataset, double lambda);

}  // namespace metasense
