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
#include "metasense/npms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "metasense/error.hpp"
#include "metasense/eval.hpp"

namespace metasense {

namespace {

constexpr double kMinScale = 1e-12;
constexpr int kMaxDegenerateBatches = 100;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Floyd's sampling of min(count, population) distinct indices, ascending.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count,
                                        std::mt19937_64& rng) {
  std::vector<std::size_t> out;
  if (count >= population) {
    out.resize(population);
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(count * 2);
  for (std::size_t j = population - count; j < population; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t t = pick(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  out.assign(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

// Chains a gradient w.r.t. meta rows (one row per entry of `positions`) to the
// projections: dL/dP_j = sum_a (1/k_a) g_a x_j(s_a)^T over covered rows.
std::vector<DenseMatrix> chain_to_projections(const DenseMatrix& grad_rows,
                                              std::span<const std::size_t> positions,
                                              const MetaModel& model,
                                              std::span<const SourceEmbeddingSet> sources,
                                              const AlignmentIndex& alignment) {
  std::vector<DenseMatrix> grads;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    std::vector<std::size_t> local;
    for (std::size_t a = 0; a < positions.size(); ++a) {
      if (alignment.row(positions[a], j) != kMissing) local.push_back(a);
    }
    DenseMatrix g(local.size(), model.dim());
    DenseMatrix x(local.size(), sources[j].dim());
    for (std::size_t i = 0; i < local.size(); ++i) {
      const std::size_t pos = positions[local[i]];
      const double inv_k = 1.0 / static_cast<double>(alignment.available_count(pos));
      const auto src = grad_rows.row(local[i]);
      auto dst = g.row(i);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = src[c] * inv_k;
      const auto xr = sources[j].row(alignment.row(pos, j));
      std::copy(xr.begin(), xr.end(), x.row(i).begin());
    }
    grads.push_back(local.empty() ? DenseMatrix(model.dim(), sources[j].dim())
                                  : multiply_atb(g, x));
  }
  return grads;
}

void check_batch(std::span<const std::size_t> batch, const AlignmentIndex& alignment) {
  for (std::size_t pos : batch) {
    if (pos >= alignment.size()) {
      fail(ErrorCode::kIndexOutOfRange, "batch position " + std::to_string(pos));
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorCode::kInvalidArgument, "learning rate must be positive");
  }
  if (pip_batch_size < 2) fail(ErrorCode::kInvalidArgument, "PIP batch size must be at least 2");
  if (context_batch_size < 1) fail(ErrorCode::kInvalidArgument, "context batch size must be positive");
  if (!(scale_ema_decay >= 0.0 && scale_ema_decay < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "scale EMA decay must lie in [0, 1)");
  }
}

void LossScales::update_pip(double value) {
  const double v = std::abs(value);
  pip_ = has_pip_ ? decay_ * pip_ + (1.0 - decay_) * v : v;
  has_pip_ = true;
}

void LossScales::update_cont(double shifted_value) {
  const double v = std::abs(shifted_value);
  cont_ = has_cont_ ? decay_ * cont_ + (1.0 - decay_) * v : v;
  has_cont_ = true;
}

double LossScales::pip() const noexcept { return std::max(pip_, kMinScale); }
double LossScales::cont() const noexcept { return std::max(cont_, kMinScale); }

double total_loss(double pip, double cont, const LossScales& scales, double alpha) {
  double total = 0.0;
  if (alpha > 0.0) total += alpha * (pip / scales.pip());
  if (alpha < 1.0) total += (1.0 - alpha) * ((cont + 1.0) / scales.cont());
  return total;
}

LossAndGrad pip_loss_batch(std::span<const SourceEmbeddingSet> sources, const MetaModel& model,
                           const AlignmentIndex& alignment, std::span<const std::size_t> batch) {
  model.check_compatible(sources);
  check_batch(batch, alignment);
  const DenseMatrix m = encode_rows(model, batch, sources, alignment);  // B x d
  DenseMatrix grad_m(batch.size(), model.dim());
  double loss = 0.0;
  bool informative = false;

  for (std::size_t j = 0; j < sources.size(); ++j) {
    std::vector<std::size_t> local;
    for (std::size_t a = 0; a < batch.size(); ++a) {
      if (alignment.row(batch[a], j) != kMissing) local.push_back(a);
    }
    if (local.empty()) continue;
    informative |= local.size() >= 2;

    DenseMatrix x(local.size(), sources[j].dim());
    DenseMatrix ml(local.size(), model.dim());
    for (std::size_t i = 0; i < local.size(); ++i) {
      const auto xr = sources[j].row(alignment.row(batch[local[i]], j));
      std::copy(xr.begin(), xr.end(), x.row(i).begin());
      const auto mr = m.row(local[i]);
      std::copy(mr.begin(), mr.end(), ml.row(i).begin());
    }
    std::vector<std::size_t> ids(local.size());
    std::iota(ids.begin(), ids.end(), 0);
    const PipBlock px = pip_block(x, ids, ids);
    const PipBlock pm = pip_block(ml, ids, ids);
    loss += frob_sq_diff(px, pm);

    DenseMatrix diff = px.values;
    for (std::size_t i = 0; i < diff.size(); ++i) diff.data()[i] -= pm.values.data()[i];
    const DenseMatrix dm = multiply(diff, ml);
    for (std::size_t i = 0; i < local.size(); ++i) {
      auto dst = grad_m.row(local[i]);
      const auto src = dm.row(i);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] -= 4.0 * src[c];
    }
  }
  if (!informative) {
    fail(ErrorCode::kDegenerateBatch, "no source covers two or more senses of the batch");
  }
  return {loss, chain_to_projections(grad_m, batch, model, sources, alignment)};
}

std::vector<ContextExample> resolve_examples(const ContextDataset& dataset,
                                             const AlignmentIndex& alignment,
                                             std::size_t* skipped) {
  std::vector<ContextExample> out;
  std::size_t left_out = 0;
  for (const auto& inst : dataset.instances) {
    const auto pos = inst.labeled() ? alignment.position(inst.gold.front()) : std::nullopt;
    if (!pos) {
      ++left_out;
      continue;
    }
    out.push_back({*pos, inst.context});
  }
  if (skipped) *skipped = left_out;
  return out;
}

LossAndGrad context_loss_batch(const MetaModel& model, std::span<const SourceEmbeddingSet> sources,
                               const AlignmentIndex& alignment,
                               std::span<const ContextExample> examples) {
  model.check_compatible(sources);
  if (examples.empty()) fail(ErrorCode::kInvalidArgument, "empty context batch");
  const std::size_t d = model.dim();
  std::vector<std::size_t> positions;
  positions.reserve(examples.size());
  for (const auto& e : examples) {
    if (e.context.size() != d) {
      fail(ErrorCode::kDimMismatch, "context dim " + std::to_string(e.context.size()) +
                                        " vs meta dim " + std::to_string(d));
    }
    positions.push_back(e.position);
  }
  check_batch(positions, alignment);

  const DenseMatrix m = encode_rows(model, positions, sources, alignment);
  const double inv_n = 1.0 / static_cast<double>(examples.size());
  DenseMatrix grad_m(examples.size(), d);
  double loss = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto mi = m.row(i);
    const auto f = examples[i].context;
    double mf = 0.0, mm = 0.0, ff = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double fc = f[c];
      mf += mi[c] * fc;
      mm += mi[c] * mi[c];
      ff += fc * fc;
    }
    if (mm == 0.0 || ff == 0.0) {
      fail(ErrorCode::kZeroVector, "zero meta or context vector for sense " +
                                       alignment.sense(positions[i]).str());
    }
    const double nm = std::sqrt(mm);
    const double nf = std::sqrt(ff);
    const double cos = mf / (nm * nf);
    loss -= cos * inv_n;
    // d cos / d m = f / (|m||f|) - cos * m / |m|^2
    auto g = grad_m.row(i);
    for (std::size_t c = 0; c < d; ++c) {
      g[c] = -inv_n * (static_cast<double>(f[c]) / (nm * nf) - cos * mi[c] / mm);
    }
  }
  return {loss, chain_to_projections(grad_m, positions, model, sources, alignment)};
}

LossAndGrad context_loss_batch(const MetaModel& model, std::span<const SourceEmbeddingSet> sources,
                               const AlignmentIndex& alignment,
                               std::span<const ContextInstance> instances) {
  std::vector<ContextExample> examples;
  for (const auto& inst : instances) {
    if (!inst.labeled()) fail(ErrorCode::kSenseUncovered, "instance " + inst.id + " is unlabeled");
    const auto pos = alignment.position(inst.gold.front());
    if (!pos) fail(ErrorCode::kSenseUncovered, "instance " + inst.id + ": " + inst.gold.front().str());
    examples.push_back({*pos, inst.context});
  }
  return context_loss_batch(model, sources, alignment, examples);
}

TrainResult train_npms(std::span<const SourceEmbeddingSet> sources, const ContextDataset& dataset,
                       const AlignmentIndex& alignment, const TrainConfig& config) {
  config.validate();
  if (sources.empty()) fail(ErrorCode::kInvalidArgument, "no source embeddings");
  if (alignment.source_count() != sources.size()) {
    fail(ErrorCode::kInvalidArgument, "alignment does not match the sources");
  }
  const bool use_pip = config.alpha > 0.0;
  const bool use_cont = config.alpha < 1.0;

  TrainResult result;
  std::vector<ContextExample> examples;
  if (use_cont) {
    examples = resolve_examples(dataset, alignment, &result.skipped_instances);
    if (examples.empty()) {
      fail(ErrorCode::kInvalidArgument, "alpha < 1 needs labeled contexts of aligned senses");
    }
  }

  std::size_t d = config.output_dim;
  if (d == 0) {
    if (!dataset.instances.empty()) {
      d = dataset.context_dim;
    } else {
      for (const auto& s : sources) d = std::max(d, s.dim());
    }
  }
  if (use_cont && d != dataset.context_dim) {
    fail(ErrorCode::kDimMismatch, "output dim " + std::to_string(d) + " differs from context dim " +
                                      std::to_string(dataset.context_dim));
  }

  MetaModel model = MetaModel::identity(d, sources);
  std::mt19937_64 context_rng(config.seed);
  std::mt19937_64 pip_rng(config.pip_seed.value_or(splitmix64(config.seed)));
  LossScales scales(config.scale_ema_decay);
  result.log.reserve(config.steps);

  for (std::size_t step = 0; step < config.steps; ++step) {
    LossAndGrad pip;
    LossAndGrad cont;
    if (use_pip) {
      for (int attempt = 1;; ++attempt) {
        const auto batch = sample_indices(alignment.size(), config.pip_batch_size, pip_rng);
        try {
          pip = pip_loss_batch(sources, model, alignment, batch);
          break;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kDegenerateBatch || attempt >= kMaxDegenerateBatches) throw;
        }
      }
      scales.update_pip(pip.loss);
    }
    if (use_cont) {
      const auto picks = sample_indices(examples.size(), config.context_batch_size, context_rng);
      std::vector<ContextExample> batch;
      batch.reserve(picks.size());
      for (std::size_t i : picks) batch.push_back(examples[i]);
      cont = context_loss_batch(model, sources, alignment, batch);
      scales.update_cont(cont.loss + 1.0);
    }

    const double total = total_loss(pip.loss, cont.loss, scales, config.alpha);
    if (!std::isfinite(total)) {
      fail(ErrorCode::kDivergedLoss, "loss is not finite at step " + std::to_string(step));
    }
    result.log.push_back({step, pip.loss, cont.loss, total});

    const double wp = use_pip ? config.alpha / scales.pip() : 0.0;
    const double wc = use_cont ? (1.0 - config.alpha) / scales.cont() : 0.0;
    for (std::size_t j = 0; j < sources.size(); ++j) {
      auto p = model.projection(j).data();
      for (std::size_t i = 0; i < p.size(); ++i) {
        double g = 0.0;
        if (use_pip) g += wp * pip.grads[j].data()[i];
        if (use_cont) g += wc * cont.grads[j].data()[i];
        p[i] -= config.learning_rate * g;
      }
      if (!model.projection(j).all_finite()) {
        fail(ErrorCode::kDivergedLoss, "projection " + std::to_string(j) +
                                           " became non-finite at step " + std::to_string(step));
      }
    }
  }
  result.model = std::move(model);
  return result;
}

std::string format_training_log(std::span<const TrainLogRecord> log) {
  std::string out;
  for (const auto& r : log) {
    out += std::to_string(r.step) + "\t" + format_double(r.pip_loss) + "\t" +
           format_double(r.cont_loss) + "\t" + format_double(r.scaled_total) + "\n";
  }
  return out;
}

TuneResult tune_alpha(std::span<const SourceEmbeddingSet> sources, const SenseInventory& inventory,
                      const AlignmentIndex& alignment, const ContextDataset& train_set,
                      const ContextDataset& valid_set, std::span<const double> grid,
                      const TrainConfig& config) {
  if (grid.empty()) fail(ErrorCode::kInvalidArgument, "empty alpha grid");
  for (double a : grid) {
    if (!(a >= 0.0 && a <= 1.0)) fail(ErrorCode::kInvalidArgument, "alpha grid outside [0, 1]");
  }
  const auto valid = to_wsd_instances(valid_set, inventory);
  if (valid.empty()) fail(ErrorCode::kInvalidArgument, "empty validation set");
  for (const auto& inst : valid) {
    if (inst.gold.empty()) fail(ErrorCode::kInvalidArgument, "validation instance " + inst.id + " is unlabeled");
  }

  TuneResult out;
  bool have_best = false;
  double best_f1 = 0.0;
  for (double alpha : grid) {
    TrainConfig cfg = config;
    cfg.alpha = alpha;
    TrainResult trained = train_npms(sources, train_set, alignment, cfg);
    const SourceEmbeddingSet meta = materialize(trained.model, sources, alignment);
    const double f1 = wsd_f1(wsd_predict_all(valid, meta), valid);
    out.scores.push_back({alpha, f1});
    if (!have_best || f1 > best_f1 || (f1 == best_f1 && alpha < out.best_alpha)) {
      have_best = true;
      best_f1 = f1;
      out.best_alpha = alpha;
      out.best = std::move(trained);
    }
  }
  return out;
}

}  // namespace metasense
