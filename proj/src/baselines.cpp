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
#include "metasense/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "metasense/error.hpp"

namespace metasense {

namespace {

void check_inputs(std::span<const SourceEmbeddingSet> sources, const AlignmentIndex& alignment) {
  if (sources.empty()) fail(ErrorCode::kInvalidArgument, "no source embeddings");
  if (alignment.source_count() != sources.size()) {
    fail(ErrorCode::kInvalidArgument, "alignment was built for " +
                                          std::to_string(alignment.source_count()) + " sources");
  }
  if (alignment.size() == 0) fail(ErrorCode::kEmptyUnion, "alignment covers no senses");
}

std::vector<double> source_vector(const SourceEmbeddingSet& src, std::size_t row, bool normalize) {
  const auto x = src.row(row);
  std::vector<double> v(x.begin(), x.end());
  if (normalize) {
    const double n = norm2(v);
    if (n > 0.0) {
      for (double& e : v) e /= n;
    }
  }
  return v;
}

std::vector<SenseId> aligned_ids(const AlignmentIndex& alignment) {
  return {alignment.senses().begin(), alignment.senses().end()};
}

// Covered rows of source j as a dense matrix, plus their alignment positions.
DenseMatrix covered_rows(const SourceEmbeddingSet& src, std::size_t j,
                         const AlignmentIndex& alignment, bool normalize) {
  const auto positions = alignment.covered_by(j);
  DenseMatrix x(positions.size(), src.dim());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto v = source_vector(src, alignment.row(positions[i], j), normalize);
    std::copy(v.begin(), v.end(), x.row(i).begin());
  }
  return x;
}

}  // namespace

SourceEmbeddingSet meta_avg(std::span<const SourceEmbeddingSet> sources,
                            const AlignmentIndex& alignment, const CombineOptions& options) {
  check_inputs(sources, alignment);
  std::size_t dim = 0;
  for (const auto& s : sources) dim = std::max(dim, s.dim());

  std::vector<float> rows(alignment.size() * dim);
  std::vector<double> acc(dim);
  for (std::size_t pos = 0; pos < alignment.size(); ++pos) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = 0; j < sources.size(); ++j) {
      const std::size_t r = alignment.row(pos, j);
      if (r == kMissing) continue;
      const auto v = source_vector(sources[j], r, options.normalize_inputs);
      for (std::size_t c = 0; c < v.size(); ++c) acc[c] += v[c];  // zero-padded tail
    }
    const double k = static_cast<double>(alignment.available_count(pos));
    for (std::size_t c = 0; c < dim; ++c) rows[pos * dim + c] = static_cast<float>(acc[c] / k);
  }
  return SourceEmbeddingSet("avg", dim, aligned_ids(alignment), std::move(rows));
}

DenseMatrix concatenated_matrix(std::span<const SourceEmbeddingSet> sources,
                                const AlignmentIndex& alignment, const CombineOptions& options) {
  check_inputs(sources, alignment);
  std::size_t dim = 0;
  for (const auto& s : sources) dim += s.dim();
  DenseMatrix out(alignment.size(), dim);
  for (std::size_t pos = 0; pos < alignment.size(); ++pos) {
    std::size_t offset = 0;
    for (std::size_t j = 0; j < sources.size(); ++j) {
      const std::size_t r = alignment.row(pos, j);
      if (r != kMissing) {
        const auto v = source_vector(sources[j], r, options.normalize_inputs);
        std::copy(v.begin(), v.end(), out.row(pos).begin() + static_cast<std::ptrdiff_t>(offset));
      }
      offset += sources[j].dim();
    }
  }
  return out;
}

SourceEmbeddingSet meta_conc(std::span<const SourceEmbeddingSet> sources,
                             const AlignmentIndex& alignment, const CombineOptions& options) {
  const DenseMatrix m = concatenated_matrix(sources, alignment, options);
  std::vector<float> rows(m.data().begin(), m.data().end());
  return SourceEmbeddingSet("conc", m.cols(), aligned_ids(alignment), std::move(rows));
}

SourceEmbeddingSet meta_svd(std::span<const SourceEmbeddingSet> sources,
                            const AlignmentIndex& alignment, std::size_t k, std::uint64_t seed,
                            const CombineOptions& options) {
  const DenseMatrix m = concatenated_matrix(sources, alignment, options);
  const SvdResult svd = truncated_svd(m, k, seed);
  std::vector<float> rows(m.rows() * k);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      rows[i * k + c] = static_cast<float>(svd.u(i, c) * svd.s[c]);
    }
  }
  return SourceEmbeddingSet("svd", k, aligned_ids(alignment), std::move(rows));
}

namespace {

struct AemeData {
  std::vector<DenseMatrix> x;  // covered rows per source
  double sense_count = 0.0;
};

AemeData aeme_data(std::span<const SourceEmbeddingSet> sources, const AlignmentIndex& alignment,
                   bool normalize) {
  AemeData data;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    data.x.push_back(covered_rows(sources[j], j, alignment, normalize));
  }
  data.sense_count = static_cast<double>(alignment.size());
  return data;
}

// Returns the mean loss; fills gradients when the pointers are non-null.
double aeme_objective(const AemeModel& model, const AemeData& data,
                      std::vector<DenseMatrix>* grad_enc, std::vector<DenseMatrix>* grad_dec) {
  double loss = 0.0;
  for (std::size_t j = 0; j < data.x.size(); ++j) {
    const DenseMatrix& x = data.x[j];
    if (x.rows() == 0) {
      if (grad_enc) {
        (*grad_enc)[j] = DenseMatrix(model.encoders[j].rows(), model.encoders[j].cols());
        (*grad_dec)[j] = DenseMatrix(model.decoders[j].rows(), model.decoders[j].cols());
      }
      continue;
    }
    const DenseMatrix h = multiply_abt(x, model.encoders[j]);    // n x latent
    DenseMatrix r = multiply_abt(h, model.decoders[j]);          // n x d_j
    for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] -= x.data()[i];
    const double scale = model.weights[j] / data.sense_count;
    double sq = 0.0;
    for (double v : r.data()) sq += v * v;
    loss += scale * sq;
    if (grad_enc) {
      DenseMatrix gd = multiply_atb(r, h);                            // d_j x latent
      DenseMatrix gE = multiply_atb(multiply(r, model.decoders[j]), x);  // latent x d_j
      for (double& v : gd.data()) v *= 2.0 * scale;
      for (double& v : gE.data()) v *= 2.0 * scale;
      (*grad_dec)[j] = std::move(gd);
      (*grad_enc)[j] = std::move(gE);
    }
  }
  return loss;
}

}  // namespace

double aeme_loss(const AemeModel& model, std::span<const SourceEmbeddingSet> sources,
                 const AlignmentIndex& alignment, bool normalize_inputs) {
  check_inputs(sources, alignment);
  return aeme_objective(model, aeme_data(sources, alignment, normalize_inputs), nullptr, nullptr);
}

SourceEmbeddingSet aeme_encode(const AemeModel& model,
                               std::span<const SourceEmbeddingSet> sources,
                               const AlignmentIndex& alignment, bool normalize_inputs) {
  check_inputs(sources, alignment);
  const std::size_t dim = model.latent_dim;
  std::vector<float> rows(alignment.size() * dim);
  std::vector<double> acc(dim);
  for (std::size_t pos = 0; pos < alignment.size(); ++pos) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = 0; j < sources.size(); ++j) {
      const std::size_t r = alignment.row(pos, j);
      if (r == kMissing) continue;
      const auto x = source_vector(sources[j], r, normalize_inputs);
      const auto z = multiply(model.encoders[j], x);
      for (std::size_t c = 0; c < dim; ++c) acc[c] += z[c];
    }
    const double k = static_cast<double>(alignment.available_count(pos));
    for (double& v : acc) v /= k;
    const double n = norm2(acc);
    for (std::size_t c = 0; c < dim; ++c) {
      rows[pos * dim + c] = static_cast<float>(n > 0.0 ? acc[c] / n : 0.0);
    }
  }
  return SourceEmbeddingSet("aeme", dim, aligned_ids(alignment), std::move(rows));
}

AemeResult train_aeme(std::span<const SourceEmbeddingSet> sources,
                      const AlignmentIndex& alignment, const AemeConfig& config) {
  check_inputs(sources, alignment);
  if (config.latent_dim == 0) fail(ErrorCode::kInvalidArgument, "latent dim must be positive");
  if (!(config.learning_rate > 0.0)) fail(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (!config.source_weights.empty() && config.source_weights.size() != sources.size()) {
    fail(ErrorCode::kInvalidArgument, "one weight per source required");
  }

  AemeModel model;
  model.latent_dim = config.latent_dim;
  model.weights = config.source_weights.empty() ? std::vector<double>(sources.size(), 1.0)
                                                : config.source_weights;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const auto& src : sources) {
    if (config.init == AemeInit::kIdentity) {
      model.encoders.push_back(DenseMatrix::rectangular_identity(config.latent_dim, src.dim()));
      model.decoders.push_back(DenseMatrix::rectangular_identity(src.dim(), config.latent_dim));
    } else {
      DenseMatrix e(config.latent_dim, src.dim());
      DenseMatrix d(src.dim(), config.latent_dim);
      const double se = 1.0 / std::sqrt(static_cast<double>(src.dim()));
      const double sd = 1.0 / std::sqrt(static_cast<double>(config.latent_dim));
      for (double& v : e.data()) v = se * gauss(rng);
      for (double& v : d.data()) v = sd * gauss(rng);
      model.encoders.push_back(std::move(e));
      model.decoders.push_back(std::move(d));
    }
  }

  const AemeData data = aeme_data(sources, alignment, config.normalize_inputs);
  std::vector<DenseMatrix> grad_enc(sources.size());
  std::vector<DenseMatrix> grad_dec(sources.size());
  std::vector<double> checkpoints;
  const std::size_t every = std::max<std::size_t>(1, config.checkpoint_every);

  for (std::size_t step = 0; step < config.steps; ++step) {
    const double loss = aeme_objective(model, data, &grad_enc, &grad_dec);
    if (!std::isfinite(loss)) {
      fail(ErrorCode::kDivergedLoss, "reconstruction loss is not finite at step " + std::to_string(step));
    }
    if (step % every == 0) checkpoints.push_back(loss);
    for (std::size_t j = 0; j < sources.size(); ++j) {
      auto e = model.encoders[j].data();
      auto ge = grad_enc[j].data();
      for (std::size_t i = 0; i < e.size(); ++i) e[i] -= config.learning_rate * ge[i];
      auto d = model.decoders[j].data();
      auto gd = grad_dec[j].data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= config.learning_rate * gd[i];
    }
  }
  const double final_loss = aeme_objective(model, data, nullptr, nullptr);
  if (!std::isfinite(final_loss)) {
    fail(ErrorCode::kDivergedLoss, "reconstruction loss is not finite after training");
  }
  if (config.steps % every == 0) checkpoints.push_back(final_loss);

  SourceEmbeddingSet embeddings = aeme_encode(model, sources, alignment, config.normalize_inputs);
  return {std::move(model), std::move(embeddings), std::move(checkpoints)};
}

}  // namespace metasense
