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

// Neighbourhood-preserving meta-sense embedding training.
//
// The meta vector of a sense is the average of P_j x_j(s) over the sources
// that cover it. Training minimises a weighted sum of two mean-scaled losses:
//
//   pip:  sum_j || X_j X_j^T - M M^T ||_F^2, each term restricted to the
//         senses source j covers, computed on B x B sense blocks;
//   cont: -mean cos(m(s), f(w;c)) over sense-annotated contexts.
//
// Each loss is divided by a running mean of its own magnitude before the
// alpha weighting, so alpha = 1 and alpha = 0 switch one loss off entirely.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metasense/core.hpp"
#include "metasense/linalg.hpp"
#include "metasense/storage.hpp"

namespace metasense {

struct TrainConfig {
  double alpha = 0.5;
  double learning_rate = 0.001;
  std::size_t steps = 1000;
  std::size_t pip_batch_size = 512;
  std::size_t context_batch_size = 64;
  std::uint64_t seed = 0;
  // Seeds the PIP batch stream; derived from `seed` when unset.
  std::optional<std::uint64_t> pip_seed;
  double scale_ema_decay = 0.99;
  // 0 picks the context dimensionality, or the largest source dimensionality
  // when there is no context data.
  std::size_t output_dim = 0;

  /// Throws kInvalidArgument.
  void validate() const;
};

/// Running means of the two loss magnitudes.
class LossScales {
 public:
  explicit LossScales(double decay = 0.99) : decay_(decay) {}

  /// The first update of each component initialises it to that value.
  void update_pip(double value);
  void update_cont(double shifted_value);

  bool has_pip() const noexcept { return has_pip_; }
  bool has_cont() const noexcept { return has_cont_; }
  /// Floored at a tiny positive value so division is always defined.
  double pip() const noexcept;
  double cont() const noexcept;

 private:
  double decay_;
  double pip_ = 0.0;
  double cont_ = 0.0;
  bool has_pip_ = false;
  bool has_cont_ = false;
};

/// alpha * pip / ema_pip + (1 - alpha) * (cont + 1) / ema_cont. A term whose
/// weight is zero is skipped, so its inputs never reach the result.
double total_loss(double pip, double cont, const LossScales& scales, double alpha);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<DenseMatrix> grads;  // d x d_j per source
};

/// PIP loss on the block of `batch` (alignment positions) with analytic
/// gradients w.r.t. every P_j. Throws kDegenerateBatch when no source covers
/// two or more batch senses.
LossAndGrad pip_loss_batch(std::span<const SourceEmbeddingSet> sources, const MetaModel& model,
                           const AlignmentIndex& alignment, std::span<const std::size_t> batch);

/// A training context resolved to an alignment position.
struct ContextExample {
  std::size_t position = 0;
  std::span<const float> context;
};

/// Labeled instances whose first gold key is aligned; `skipped` receives the
/// number left out.
std::vector<ContextExample> resolve_examples(const ContextDataset& dataset,
                                             const AlignmentIndex& alignment,
                                             std::size_t* skipped = nullptr);

/// -mean cos(m(s), f) with analytic gradients. Throws kDimMismatch,
/// kZeroVector.
LossAndGrad context_loss_batch(const MetaModel& model, std::span<const SourceEmbeddingSet> sources,
                               const AlignmentIndex& alignment,
                               std::span<const ContextExample> examples);

/// Same, for dataset instances. Throws kSenseUncovered for an unlabeled or
/// unaligned instance.
LossAndGrad context_loss_batch(const MetaModel& model, std::span<const SourceEmbeddingSet> sources,
                               const AlignmentIndex& alignment,
                               std::span<const ContextInstance> instances);

struct TrainLogRecord {
  std::size_t step = 0;
  double pip_loss = 0.0;   // 0 when alpha == 0
  double cont_loss = 0.0;  // 0 when alpha == 1
  double scaled_total = 0.0;
};

struct TrainResult {
  MetaModel model;
  std::vector<TrainLogRecord> log;
  std::size_t skipped_instances = 0;
};

/// Identity-initialised vanilla SGD. Deterministic for a given config,
/// independent of the worker count. Throws kDivergedLoss, kDegenerateBatch
/// (after 100 consecutive degenerate PIP batches), kInvalidArgument.
TrainResult train_npms(std::span<const SourceEmbeddingSet> sources, const ContextDataset& dataset,
                       const AlignmentIndex& alignment, const TrainConfig& config);

/// "step pip_loss cont_loss scaled_total" tab-separated lines.
std::string format_training_log(std::span<const TrainLogRecord> log);

struct AlphaScore {
  double alpha = 0.0;
  double f1 = 0.0;
};

struct TuneResult {
  double best_alpha = 0.0;
  std::vector<AlphaScore> scores;  // grid order
  TrainResult best;
};

/// Trains one model per grid value and keeps the best WSD F1 on the
/// validation set; ties go to the smaller alpha.
TuneResult tune_alpha(std::span<const SourceEmbeddingSet> sources, const SenseInventory& inventory,
                      const AlignmentIndex& alignment, const ContextDataset& train_set,
                      const ContextDataset& valid_set, std::span<const double> grid,
                      const TrainConfig& config);

}  // namespace metasense
