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
#include "metasense/eval.hpp"

#include <algorithm>
#include <cmath>

#include "metasense/align.hpp"
#include "metasense/error.hpp"
#include "metasense/parallel.hpp"

namespace metasense {

namespace {

std::size_t compared_dim(const SourceEmbeddingSet& senses, const ScoringOptions& options) {
  if (options.projection == nullptr) return senses.dim();
  if (options.projection->cols() != senses.dim()) {
    fail(ErrorCode::kDimMismatch, "projection expects sense dim " +
                                      std::to_string(options.projection->cols()) + ", embeddings have " +
                                      std::to_string(senses.dim()));
  }
  return options.projection->rows();
}

std::vector<double> prepare_context(std::span<const float> f, std::size_t dim, bool tile) {
  if (f.size() == dim) return {f.begin(), f.end()};
  if (!tile) {
    fail(ErrorCode::kDimMismatch, "context dim " + std::to_string(f.size()) +
                                      " vs compared dim " + std::to_string(dim));
  }
  try {
    return tile_context(f, dim);
  } catch (const Error& e) {
    fail(ErrorCode::kDimMismatch, e.what());
  }
}

// Sense vector in the space contexts are compared in.
std::vector<double> sense_vector(const SourceEmbeddingSet& senses, std::size_t row,
                                 const ScoringOptions& options) {
  const auto m = senses.row(row);
  std::vector<double> v(m.begin(), m.end());
  if (options.projection != nullptr) return multiply(*options.projection, v);
  return v;
}

WsdPrediction predict_prepared(const std::string& id, std::span<const SenseId> candidates,
                               std::span<const double> ctx, const SourceEmbeddingSet& senses,
                               const ScoringOptions& options) {
  WsdPrediction best{id, SenseId{}, 0.0, true};
  bool found = false;
  for (const auto& cand : candidates) {
    const auto row = senses.find(cand);
    if (!row) continue;
    const double score = cosine(sense_vector(senses, *row, options), ctx);
    if (!found || score > best.score || (score == best.score && cand < best.sense)) {
      best.sense = cand;
      best.score = score;
      best.backoff = false;
      found = true;
    }
  }
  if (!found) {
    if (candidates.empty()) fail(ErrorCode::kNoCandidates, "instance " + id + " has no candidates");
    best.sense = candidates.front();
  }
  return best;
}

}  // namespace

std::vector<WsdInstance> to_wsd_instances(const ContextDataset& dataset,
                                          const SenseInventory& inventory) {
  std::vector<WsdInstance> out;
  out.reserve(dataset.instances.size());
  for (const auto& inst : dataset.instances) {
    WsdInstance w{inst.id, inst.lemma, {}, inst.gold, inst.context};
    if (inst.candidates_from_inventory) {
      const auto cands = inventory.candidates(inst.lemma);
      w.candidates.assign(cands.begin(), cands.end());
    } else {
      w.candidates = inst.candidates;
      std::sort(w.candidates.begin(), w.candidates.end());
      w.candidates.erase(std::unique(w.candidates.begin(), w.candidates.end()), w.candidates.end());
    }
    if (w.candidates.empty()) {
      fail(ErrorCode::kNoCandidates, "instance " + inst.id + ": no senses for '" + inst.lemma + "'");
    }
    out.push_back(std::move(w));
  }
  return out;
}

WsdPrediction wsd_predict(const WsdInstance& inst, const SourceEmbeddingSet& senses,
                          const ScoringOptions& options) {
  const std::size_t dim = compared_dim(senses, options);
  const auto ctx = prepare_context(inst.context, dim, options.tile);
  return predict_prepared(inst.id, inst.candidates, ctx, senses, options);
}

std::vector<WsdPrediction> wsd_predict_all(std::span<const WsdInstance> instances,
                                           const SourceEmbeddingSet& senses,
                                           const ScoringOptions& options) {
  std::vector<WsdPrediction> out(instances.size());
  parallel_for(0, instances.size(),
               [&](std::size_t i) { out[i] = wsd_predict(instances[i], senses, options); }, 64);
  return out;
}

WsdScore wsd_score(std::span<const WsdPrediction> predictions, std::span<const WsdInstance> golds) {
  if (predictions.size() != golds.size()) {
    fail(ErrorCode::kIdMismatch, std::to_string(predictions.size()) + " predictions for " +
                                     std::to_string(golds.size()) + " instances");
  }
  WsdScore score;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (predictions[i].instance_id != golds[i].id) {
      fail(ErrorCode::kIdMismatch, predictions[i].instance_id + " vs " + golds[i].id);
    }
    const auto& gold = golds[i].gold;
    score.correct += std::find(gold.begin(), gold.end(), predictions[i].sense) != gold.end();
    score.backoff += predictions[i].backoff;
    ++score.total;
  }
  return score;
}

double wsd_f1(std::span<const WsdPrediction> predictions, std::span<const WsdInstance> golds) {
  return wsd_score(predictions, golds).f1();
}

std::vector<WicInstance> to_wic_instances(const ContextDataset& dataset) {
  if (dataset.instances.size() % 2 != 0) {
    fail(ErrorCode::kParseError, "WiC data needs an even number of records");
  }
  auto label_of = [](const ContextInstance& inst) -> std::optional<bool> {
    if (inst.gold.empty()) return std::nullopt;
    if (inst.gold.size() == 1 && inst.gold[0].str() == "T") return true;
    if (inst.gold.size() == 1 && inst.gold[0].str() == "F") return false;
    fail(ErrorCode::kParseError, "record " + inst.id + ": WiC label must be T, F, or ?");
  };
  std::vector<WicInstance> out;
  for (std::size_t i = 0; i < dataset.instances.size(); i += 2) {
    const auto& a = dataset.instances[i];
    const auto& b = dataset.instances[i + 1];
    if (a.lemma != b.lemma) {
      fail(ErrorCode::kParseError, "records " + a.id + " and " + b.id + " target different words");
    }
    const auto la = label_of(a);
    if (la != label_of(b)) {
      fail(ErrorCode::kParseError, "records " + a.id + " and " + b.id + " disagree on the label");
    }
    out.push_back({a.id, a.lemma, a.context, b.context, la});
  }
  return out;
}

ContextDataset from_wic_instances(std::span<const WicInstance> instances) {
  ContextDataset ds;
  for (const auto& w : instances) {
    if (w.context1.size() != w.context2.size()) {
      fail(ErrorCode::kDimMismatch, "WiC instance " + w.id + " has unequal context dims");
    }
    if (ds.instances.empty()) ds.context_dim = w.context1.size();
    std::vector<SenseId> gold;
    if (w.label) gold.emplace_back(*w.label ? "T" : "F");
    ds.instances.push_back({w.id, w.word, gold, {}, true, w.context1});
    ds.instances.push_back({w.id + ".2", w.word, gold, {}, true, w.context2});
  }
  return ds;
}

std::pair<SenseId, SenseId> wic_disambiguate(const WicInstance& inst,
                                             const SenseInventory& inventory,
                                             const SourceEmbeddingSet& senses,
                                             const ScoringOptions& options) {
  if (inst.context1.size() != inst.context2.size()) {
    fail(ErrorCode::kDimMismatch, "WiC instance " + inst.id + " has unequal context dims");
  }
  std::vector<SenseId> covered;
  for (const auto& s : inventory.candidates(inst.word)) {
    if (senses.find(s)) covered.push_back(s);
  }
  if (covered.empty()) fail(ErrorCode::kNoCandidates, "no covered senses for '" + inst.word + "'");
  const std::size_t dim = compared_dim(senses, options);
  const auto f1 = prepare_context(inst.context1, dim, options.tile);
  const auto f2 = prepare_context(inst.context2, dim, options.tile);
  return {predict_prepared(inst.id, covered, f1, senses, options).sense,
          predict_prepared(inst.id, covered, f2, senses, options).sense};
}

WicFeatures wic_features(const WicInstance& inst, const SenseId& s1, const SenseId& s2,
                         const SourceEmbeddingSet& senses, const ScoringOptions& options) {
  if (inst.context1.size() != inst.context2.size()) {
    fail(ErrorCode::kDimMismatch, "WiC instance " + inst.id + " has unequal context dims");
  }
  const auto r1 = senses.find(s1);
  const auto r2 = senses.find(s2);
  if (!r1 || !r2) fail(ErrorCode::kSenseUncovered, "WiC instance " + inst.id);
  const std::size_t dim = compared_dim(senses, options);
  const auto f1 = prepare_context(inst.context1, dim, options.tile);
  const auto f2 = prepare_context(inst.context2, dim, options.tile);
  const auto m1 = sense_vector(senses, *r1, options);
  const auto m2 = sense_vector(senses, *r2, options);
  const std::vector<double> raw1(inst.context1.begin(), inst.context1.end());
  const std::vector<double> raw2(inst.context2.begin(), inst.context2.end());
  return {cosine(m1, m2), cosine(raw1, raw2), cosine(m1, f1),
          cosine(m2, f2), cosine(m1, f2),     cosine(m2, f1)};
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logreg_loss(const LogRegModel& m, std::span<const WicFeatures> x, std::span<const bool> y,
                   double l2) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double z = m.bias;
    for (std::size_t c = 0; c < 6; ++c) z += m.weights[c] * x[i][c];
    acc += softplus(z) - (y[i] ? z : 0.0);
  }
  double reg = 0.0;
  for (double w : m.weights) reg += w * w;
  return acc / static_cast<double>(x.size()) + 0.5 * l2 * reg;
}

}  // namespace

double LogRegModel::probability(const WicFeatures& x) const {
  double z = bias;
  for (std::size_t c = 0; c < 6; ++c) z += weights[c] * x[c];
  return sigmoid(z);
}

LogRegFit train_logreg(std::span<const WicFeatures> features, std::span<const bool> labels,
                       const LogRegConfig& config) {
  if (features.size() != labels.size()) {
    fail(ErrorCode::kLengthMismatch, "features and labels differ in length");
  }
  if (features.size() < 2) fail(ErrorCode::kSingleClass, "need at least two examples");
  const auto positives = std::count(labels.begin(), labels.end(), true);
  if (positives == 0 || static_cast<std::size_t>(positives) == labels.size()) {
    fail(ErrorCode::kSingleClass, "training labels contain one class");
  }

  LogRegFit fit;
  fit.model.config = config;
  double lr = config.learning_rate;
  double loss = logreg_loss(fit.model, features, labels, config.l2);
  const std::size_t every = std::max<std::size_t>(1, config.checkpoint_every);
  const double n = static_cast<double>(features.size());
  for (std::size_t it = 0; it < config.iterations; ++it) {
    if (it % every == 0) fit.checkpoints.push_back(loss);
    WicFeatures gw{};
    double gb = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const double r = fit.model.probability(features[i]) - (labels[i] ? 1.0 : 0.0);
      for (std::size_t c = 0; c < 6; ++c) gw[c] += r * features[i][c];
      gb += r;
    }
    for (std::size_t c = 0; c < 6; ++c) gw[c] = gw[c] / n + config.l2 * fit.model.weights[c];
    gb /= n;

    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      LogRegModel trial = fit.model;
      for (std::size_t c = 0; c < 6; ++c) trial.weights[c] -= lr * gw[c];
      trial.bias -= lr * gb;
      const double trial_loss = logreg_loss(trial, features, labels, config.l2);
      if (trial_loss <= loss) {
        fit.model = trial;
        loss = trial_loss;
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;  // no descent step left at machine precision
  }
  fit.checkpoints.push_back(loss);
  return fit;
}

double wic_accuracy(const LogRegModel& model, std::span<const WicFeatures> features,
                    std::span<const bool> labels) {
  if (features.size() != labels.size()) {
    fail(ErrorCode::kLengthMismatch, "features and labels differ in length");
  }
  if (features.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) correct += model.predict(features[i]) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(features.size());
}

std::string format_report(std::span<const ReportRow> rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dataset + "\t" + r.metric + "\t" + format_double(r.value) + "\t" +
           std::to_string(r.backoff_count) + "\n";
  }
  return out;
}

std::string format_key_file(std::span<const WsdPrediction> predictions) {
  std::string out;
  for (const auto& p : predictions) out += p.instance_id + " " + p.sense.str() + "\n";
  return out;
}

std::string format_predictions(std::span<const WsdPrediction> predictions) {
  std::string out;
  for (const auto& p : predictions) {
    out += p.instance_id + "\t" + p.sense.str() + "\t" + format_double(p.score) + "\t" +
           (p.backoff ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace metasense
