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

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metasense/core.hpp"
#include "metasense/linalg.hpp"
#include "metasense/storage.hpp"

namespace metasense {

struct WsdInstance {
  std::string id;
  std::string lemma;
  std::vector<SenseId> candidates;  // inventory order, non-empty
  std::vector<SenseId> gold;        // empty at inference
  std::vector<float> context;
};

/// Resolves "*" candidate lists through the inventory and sorts candidates into
/// inventory order. Throws kNoCandidates for a lemma with no known senses.
std::vector<WsdInstance> to_wsd_instances(const ContextDataset& dataset,
                                          const SenseInventory& inventory);

/// How context vectors are compared with sense vectors.
struct ScoringOptions {
  // Maps a sense vector into context space: cos(A m(s), f).
  const DenseMatrix* projection = nullptr;
  // Repeat f until it matches the compared dimensionality.
  bool tile = false;
};

struct WsdPrediction {
  std::string instance_id;
  SenseId sense;
  double score = 0.0;
  bool backoff = false;
};

/// Cosine argmax over the covered candidates; ties go to the smallest id.
/// Without covered candidates the first candidate is returned with backoff
/// set. Throws kDimMismatch.
WsdPrediction wsd_predict(const WsdInstance& inst, const SourceEmbeddingSet& senses,
                          const ScoringOptions& options = {});

std::vector<WsdPrediction> wsd_predict_all(std::span<const WsdInstance> instances,
                                           const SourceEmbeddingSet& senses,
                                           const ScoringOptions& options = {});

struct WsdScore {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t backoff = 0;
  double f1() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

/// Every instance is attempted, so precision, recall, and F1 all equal accuracy.
/// A prediction is correct when it matches any gold key. Throws kIdMismatch.
WsdScore wsd_score(std::span<const WsdPrediction> predictions, std::span<const WsdInstance> golds);
double wsd_f1(std::span<const WsdPrediction> predictions, std::span<const WsdInstance> golds);

struct WicInstance {
  std::string id;
  std::string word;
  std::vector<float> context1;
  std::vector<float> context2;
  std::optional<bool> label;
};

/// Pairs consecutive records of a context dataset into WiC instances. Both
/// records share the lemma; the gold column carries "T", "F", or "?".
/// Throws kParseError on malformed pairs.
std::vector<WicInstance> to_wic_instances(const ContextDataset& dataset);
ContextDataset from_wic_instances(std::span<const WicInstance> instances);

/// 1-NN sense of the word in each context. Throws kNoCandidates.
std::pair<SenseId, SenseId> wic_disambiguate(const WicInstance& inst,
                                             const SenseInventory& inventory,
                                             const SourceEmbeddingSet& senses,
                                             const ScoringOptions& options = {});

using WicFeatures = std::array<double, 6>;

/// phi(m1,m2), phi(f1,f2), phi(m1,f1), phi(m2,f2), phi(m1,f2), phi(m2,f1).
WicFeatures wic_features(const WicInstance& inst, const SenseId& s1, const SenseId& s2,
                         const SourceEmbeddingSet& senses, const ScoringOptions& options = {});

struct LogRegConfig {
  double l2 = 1e-4;
  double learning_rate = 1.0;
  std::size_t iterations = 1000;
  std::size_t checkpoint_every = 10;
};

struct LogRegModel {
  WicFeatures weights{};
  double bias = 0.0;
  LogRegConfig config;

  double probability(const WicFeatures& x) const;
  bool predict(const WicFeatures& x) const { return probability(x) >= 0.5; }
};

struct LogRegFit {
  LogRegModel model;
  // Regularised training loss at each checkpoint, non-increasing.
  std::vector<double> checkpoints;
};

/// Full-batch gradient descent on the L2-regularised mean log loss; the step
/// is halved whenever it would increase the loss. Throws kSingleClass.
LogRegFit train_logreg(std::span<const WicFeatures> features, std::span<const bool> labels,
                       const LogRegConfig& config = {});

double wic_accuracy(const LogRegModel& model, std::span<const WicFeatures> features,
                    std::span<const bool> labels);

struct ReportRow {
  std::string dataset;
  std::string metric;
  double value = 0.0;
  std::size_t backoff_count = 0;
};

/// Tab-separated "dataset metric value backoff_count" lines.
std::string format_report(std::span<const ReportRow> rows);
/// "instance_id sense_key" lines, the shape of a WSD framework key file.
std::string format_key_file(std::span<const WsdPrediction> predictions);
/// Tab-separated "instance_id sense score backoff" lines.
std::string format_predictions(std::span<const WsdPrediction> predictions);

}  // namespace metasense
