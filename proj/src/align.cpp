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
#include "metasense/align.hpp"

#include <string>

#include "metasense/error.hpp"

namespace metasense {

namespace {

template <typename T>
std::vector<double> tile_impl(std::span<const T> f, std::size_t target_dim) {
  if (f.empty() || target_dim == 0 || target_dim % f.size() != 0) {
    fail(ErrorCode::kNotAMultiple, "cannot tile a vector of dim " + std::to_string(f.size()) +
                                       " to " + std::to_string(target_dim));
  }
  std::vector<double> out;
  out.reserve(target_dim);
  for (std::size_t r = 0; r < target_dim / f.size(); ++r) out.insert(out.end(), f.begin(), f.end());
  return out;
}

struct TrainingPairs {
  DenseMatrix x;  // N x d_meta
  DenseMatrix y;  // N x d_c
};

TrainingPairs training_pairs(const SourceEmbeddingSet& meta, const ContextDataset& dataset) {
  std::size_t n = 0;
  for (const auto& inst : dataset.instances) n += inst.labeled();
  if (n == 0) fail(ErrorCode::kInvalidArgument, "no labeled instances to fit a projection");
  TrainingPairs pairs{DenseMatrix(n, meta.dim()), DenseMatrix(n, dataset.context_dim)};
  std::size_t i = 0;
  for (const auto& inst : dataset.instances) {
    if (!inst.labeled()) continue;
    const float* m = meta.vector(inst.gold.front());
    if (m == nullptr) {
      fail(ErrorCode::kSenseUncovered, "instance " + inst.id + ": " + inst.gold.front().str());
    }
    for (std::size_t c = 0; c < meta.dim(); ++c) pairs.x(i, c) = m[c];
    for (std::size_t c = 0; c < dataset.context_dim; ++c) pairs.y(i, c) = inst.context[c];
    ++i;
  }
  return pairs;
}

double objective(const DenseMatrix& a, const TrainingPairs& pairs, double lambda) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pairs.x.rows(); ++i) {
    const auto pred = multiply(a, pairs.x.row(i));
    const auto target = pairs.y.row(i);
    for (std::size_t c = 0; c < pred.size(); ++c) {
      const double r = pred[c] - target[c];
      acc += r * r;
    }
  }
  double reg = 0.0;
  for (double v : a.data()) reg += v * v;
  return acc + lambda * reg;
}

}  // namespace

std::vector<double> tile_context(std::span<const float> f, std::size_t target_dim) {
  return tile_impl(f, target_dim);
}

std::vector<double> tile_context(std::span<const double> f, std::size_t target_dim) {
  return tile_impl(f, target_dim);
}

DenseMatrix learn_context_projection(const SourceEmbeddingSet& meta,
                                     const ContextDataset& dataset,
                                     const ProjectionOptions& options) {
  const TrainingPairs pairs = training_pairs(meta, dataset);
  if (options.solver == ProjectionSolver::kClosedForm) {
    return ridge_solve(pairs.x, pairs.y, options.lambda);
  }

  // Full-batch gradient descent on the mean objective, for systems whose
  // normal equations do not fit in memory.
  const double n = static_cast<double>(pairs.x.rows());
  DenseMatrix a(pairs.y.cols(), pairs.x.cols());
  for (std::size_t step = 0; step < options.steps; ++step) {
    DenseMatrix resid = multiply_abt(pairs.x, a);  // N x d_c
    for (std::size_t i = 0; i < resid.size(); ++i) resid.data()[i] -= pairs.y.data()[i];
    const DenseMatrix grad = multiply_atb(resid, pairs.x);  // d_c x d_meta
    for (std::size_t i = 0; i < a.size(); ++i) {
      a.data()[i] -= options.learning_rate * 2.0 * (grad.data()[i] + options.lambda * a.data()[i]) / n;
    }
    if (!a.all_finite()) fail(ErrorCode::kDivergedLoss, "projection descent diverged");
  }
  return a;
}

double projection_objective(const DenseMatrix& a, const SourceEmbeddingSet& meta,
                            const ContextDataset& dataset, double lambda) {
  return objective(a, training_pairs(meta, dataset), lambda);
}

}  // namespace metasense
