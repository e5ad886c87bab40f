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
#include "metasense/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "metasense/error.hpp"

namespace metasense {

namespace {

constexpr std::size_t kOraclePipMaxSenses = 2000;
constexpr std::size_t kOracleFdMaxParams = 500;

void invalid(const std::string& what) { fail(ErrorCode::kInvalidArgument, "world spec: " + what); }

// Gaussian vector with expected norm `sigma`.
void add_noise(std::span<double> v, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return;
  std::normal_distribution<double> gauss(0.0, sigma / std::sqrt(static_cast<double>(v.size())));
  for (double& x : v) x += gauss(rng);
}

std::size_t covered_count(double fraction, std::size_t n) {
  // Guard against 0.6 * 50 = 30.000000000000004 rounding up to 31.
  const double raw = fraction * static_cast<double>(n);
  return std::min(n, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

std::string word_key(std::size_t word, std::size_t width) {
  std::string digits = std::to_string(word);
  return "w" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

void WorldSpec::validate() const {
  if (n_words == 0) invalid("n_words must be positive");
  if (min_senses == 0 || min_senses > max_senses) invalid("senses_per_word needs 1 <= min <= max");
  if (latent_dim == 0) invalid("latent_dim must be positive");
  if (context_dim != 0 && context_dim < latent_dim) invalid("context_dim must be >= latent_dim");
  if (contexts_per_sense == 0) invalid("contexts_per_sense must be positive");
  if (!(context_noise_sigma >= 0.0) || !std::isfinite(context_noise_sigma)) {
    invalid("context_noise_sigma must be finite and non-negative");
  }
  if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) invalid("eval_fraction must lie in [0, 1)");
  if (sources.empty()) invalid("at least one source is required");
  std::set<std::string> names;
  for (const auto& s : sources) {
    if (s.name.empty() || s.name.find_first_of("/\\") != std::string::npos) {
      invalid("bad source name '" + s.name + "'");
    }
    if (!names.insert(s.name).second) invalid("duplicate source name " + s.name);
    if (s.dim < latent_dim) invalid("source " + s.name + " dim is below latent_dim");
    if (!(s.noise_sigma >= 0.0) || !std::isfinite(s.noise_sigma)) {
      invalid("source " + s.name + " noise_sigma must be finite and non-negative");
    }
    if (!(s.coverage_fraction > 0.0 && s.coverage_fraction <= 1.0)) {
      invalid("source " + s.name + " coverage_fraction must lie in (0, 1]");
    }
  }
}

WorldSpec parse_world_spec(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParseError, std::string("world spec: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::kParseError, "world spec must be a JSON object");

  static const std::set<std::string> kTop = {
      "seed", "n_words", "senses_per_word", "latent_dim", "context_dim", "contexts_per_sense",
      "context_noise_sigma", "eval_fraction", "sources"};
  static const std::set<std::string> kSource = {"name", "dim", "noise_sigma",
                                                "coverage_fraction", "rotate"};
  WorldSpec spec;
  try {
    for (const auto& [key, _] : doc.items()) {
      if (!kTop.contains(key)) invalid("unknown key " + key);
    }
    spec.seed = doc.value("seed", spec.seed);
    spec.n_words = doc.value("n_words", spec.n_words);
    if (doc.contains("senses_per_word")) {
      const auto& spw = doc["senses_per_word"];
      if (spw.is_array()) {
        if (spw.size() != 2) invalid("senses_per_word range needs two entries");
        spec.min_senses = spw[0].get<std::size_t>();
        spec.max_senses = spw[1].get<std::size_t>();
      } else {
        spec.min_senses = spec.max_senses = spw.get<std::size_t>();
      }
    }
    spec.latent_dim = doc.value("latent_dim", spec.latent_dim);
    spec.context_dim = doc.value("context_dim", spec.context_dim);
    spec.contexts_per_sense = doc.value("contexts_per_sense", spec.contexts_per_sense);
    spec.context_noise_sigma = doc.value("context_noise_sigma", spec.context_noise_sigma);
    spec.eval_fraction = doc.value("eval_fraction", spec.eval_fraction);
    if (doc.contains("sources")) {
      if (!doc["sources"].is_array()) invalid("sources must be an array");
      for (const auto& s : doc["sources"]) {
        if (!s.is_object()) invalid("each source must be an object");
        for (const auto& [key, _] : s.items()) {
          if (!kSource.contains(key)) invalid("unknown source key " + key);
        }
        SourceSpec src;
        src.name = s.value("name", "src" + std::to_string(spec.sources.size()));
        src.dim = s.value("dim", spec.latent_dim);
        src.noise_sigma = s.value("noise_sigma", src.noise_sigma);
        src.coverage_fraction = s.value("coverage_fraction", src.coverage_fraction);
        src.rotate = s.value("rotate", src.rotate);
        spec.sources.push_back(std::move(src));
      }
    }
  } catch (const json::exception& e) {
    invalid(e.what());
  }
  spec.validate();
  return spec;
}

DenseMatrix random_orthogonal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  DenseMatrix g(n, n);
  for (double& v : g.data()) v = gauss(rng);
  QrResult qr = qr_thin(g);
  for (std::size_t c = 0; c < n; ++c) {
    if (qr.r(c, c) >= 0.0) continue;
    for (std::size_t r = 0; r < n; ++r) qr.q(r, c) = -qr.q(r, c);
  }
  return qr.q;
}

SyntheticWorld gen_world(const WorldSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t width = std::max<std::size_t>(3, std::to_string(spec.n_words - 1).size());
  std::uniform_int_distribution<std::size_t> n_senses(spec.min_senses, spec.max_senses);
  std::vector<SenseId> keys;
  for (std::size_t w = 0; w < spec.n_words; ++w) {
    const std::size_t k = n_senses(rng);
    for (std::size_t s = 1; s <= k; ++s) {
      keys.emplace_back(word_key(w, width) + "%" + std::to_string(s));
    }
  }

  SyntheticWorld world;
  world.inventory = SenseInventory::from_sense_keys(keys);
  const std::size_t n = world.inventory.size();
  const std::size_t latent = spec.latent_dim;

  world.latents = DenseMatrix(n, latent);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = world.latents.row(i);
    for (double& v : row) v = gauss(rng);
    const double norm = norm2(row);
    for (double& v : row) v /= norm;
  }

  // Cyclic coverage windows over one shuffled order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t total = 0;
  for (const auto& s : spec.sources) total += covered_count(s.coverage_fraction, n);
  if (total < n) invalid("coverage fractions leave senses uncovered by every source");

  std::size_t offset = 0;
  for (const auto& src : spec.sources) {
    const std::uint64_t rot_seed = rng();
    DenseMatrix rot = src.rotate ? random_orthogonal(src.dim, rot_seed) : DenseMatrix::identity(src.dim);
    const std::size_t count = covered_count(src.coverage_fraction, n);
    std::vector<std::size_t> covered;
    for (std::size_t i = 0; i < count; ++i) covered.push_back(order[(offset + i) % n]);
    offset = (offset + count) % n;
    std::sort(covered.begin(), covered.end());

    std::vector<SenseId> ids;
    std::vector<float> rows;
    rows.reserve(covered.size() * src.dim);
    std::vector<double> padded(src.dim);
    for (std::size_t i : covered) {
      std::fill(padded.begin(), padded.end(), 0.0);
      const auto l = world.latents.row(i);
      std::copy(l.begin(), l.end(), padded.begin());
      std::vector<double> x = multiply(rot, padded);
      add_noise(x, src.noise_sigma, rng);
      ids.push_back(world.inventory.senses()[i]);
      for (double v : x) rows.push_back(static_cast<float>(v));
    }
    world.sources.emplace_back(src.name, src.dim, std::move(ids), std::move(rows));
    world.rotations.push_back(std::move(rot));
  }

  const std::size_t cdim = spec.context_dim == 0 ? latent : spec.context_dim;
  std::vector<ContextInstance> all;
  std::vector<double> f(cdim);
  for (std::size_t i = 0; i < n; ++i) {
    const SenseId& sense = world.inventory.senses()[i];
    for (std::size_t c = 0; c < spec.contexts_per_sense; ++c) {
      std::fill(f.begin(), f.end(), 0.0);
      const auto l = world.latents.row(i);
      std::copy(l.begin(), l.end(), f.begin());
      add_noise(f, spec.context_noise_sigma, rng);
      char id[32];
      std::snprintf(id, sizeof id, "ctx%06zu", all.size());
      ContextInstance inst;
      inst.id = id;
      inst.lemma = sense.lemma();
      inst.gold = {sense};
      inst.candidates_from_inventory = true;
      inst.context.assign(f.begin(), f.end());
      all.push_back(std::move(inst));
    }
  }

  std::vector<std::size_t> split(all.size());
  std::iota(split.begin(), split.end(), 0);
  std::shuffle(split.begin(), split.end(), rng);
  const auto n_eval = static_cast<std::size_t>(std::llround(spec.eval_fraction * static_cast<double>(all.size())));
  std::vector<bool> is_eval(all.size(), false);
  for (std::size_t i = 0; i < n_eval; ++i) is_eval[split[i]] = true;
  world.train.context_dim = world.eval.context_dim = cdim;
  for (std::size_t i = 0; i < all.size(); ++i) {
    (is_eval[i] ? world.eval : world.train).instances.push_back(std::move(all[i]));
  }
  return world;
}

void persist_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  std::string sizes;
  for (const auto& s : world.sources) {
    save_embeddings(s, dir / (s.name() + ".txt"), EmbeddingFormat::kText);
    sizes += s.name() + "\t" + std::to_string(s.size()) + "\n";
  }
  save_context_dataset(world.train, dir / "train.tsv");
  save_context_dataset(world.eval, dir / "eval.tsv");
  sizes += "train\t" + std::to_string(world.train.instances.size()) + "\n";
  sizes += "eval\t" + std::to_string(world.eval.instances.size()) + "\n";
  write_file(dir / "sizes.tsv", sizes);
}

double oracle_pip_loss(std::span<const SourceEmbeddingSet> sources, const MetaModel& model,
                       const AlignmentIndex& alignment) {
  const std::size_t n = alignment.size();
  if (n > kOraclePipMaxSenses) {
    fail(ErrorCode::kTooLarge, std::to_string(n) + " senses exceed the oracle limit");
  }
  const std::size_t d = model.dim();
  std::vector<std::vector<double>> meta(n, std::vector<double>(d, 0.0));
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < sources.size(); ++j) {
      const std::size_t r = alignment.row(p, j);
      if (r == kMissing) continue;
      ++k;
      const auto x = sources[j].row(r);
      const DenseMatrix& proj = model.projection(j);
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < x.size(); ++b) meta[p][a] += proj(a, b) * x[b];
      }
    }
    for (double& v : meta[p]) v /= static_cast<double>(k);
  }

  double loss = 0.0;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    std::vector<std::size_t> cov;
    for (std::size_t p = 0; p < n; ++p) {
      if (alignment.row(p, j) != kMissing) cov.push_back(p);
    }
    for (std::size_t a : cov) {
      const auto xa = sources[j].row(alignment.row(a, j));
      for (std::size_t b : cov) {
        const auto xb = sources[j].row(alignment.row(b, j));
        double px = 0.0, pm = 0.0;
        for (std::size_t c = 0; c < xa.size(); ++c) px += static_cast<double>(xa[c]) * xb[c];
        for (std::size_t c = 0; c < d; ++c) pm += meta[a][c] * meta[b][c];
        loss += (px - pm) * (px - pm);
      }
    }
  }
  return loss;
}

std::vector<DenseMatrix> oracle_grad_fd(const std::function<double(const MetaModel&)>& loss,
                                        const MetaModel& model, double h) {
  std::size_t params = 0;
  for (const auto& p : model.projections()) params += p.size();
  if (params > kOracleFdMaxParams) {
    fail(ErrorCode::kTooLarge, std::to_string(params) + " parameters exceed the oracle limit");
  }
  MetaModel probe = model;
  std::vector<DenseMatrix> grads;
  for (std::size_t j = 0; j < model.source_count(); ++j) {
    DenseMatrix g(model.projection(j).rows(), model.projection(j).cols());
    for (std::size_t i = 0; i < g.size(); ++i) {
      double& theta = probe.projection(j).data()[i];
      const double saved = theta;
      theta = saved + h;
      const double up = loss(probe);
      theta = saved - h;
      const double down = loss(probe);
      theta = saved;
      g.data()[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

SenseId oracle_1nn(const SourceEmbeddingSet& senses, std::span<const float> context,
                   std::span<const SenseId> candidates) {
  if (candidates.empty()) fail(ErrorCode::kNoCandidates, "no candidates");
  if (context.size() != senses.dim()) fail(ErrorCode::kDimMismatch, "context vs sense dim");
  const SenseId* best = nullptr;
  double best_score = 0.0;
  for (const auto& cand : candidates) {
    const float* v = senses.vector(cand);
    if (v == nullptr) continue;
    double uv = 0.0, uu = 0.0, ff = 0.0;
    for (std::size_t c = 0; c < context.size(); ++c) {
      uv += static_cast<double>(v[c]) * context[c];
      uu += static_cast<double>(v[c]) * v[c];
      ff += static_cast<double>(context[c]) * context[c];
    }
    const double score = uv / (std::sqrt(uu) * std::sqrt(ff));
    if (best == nullptr || score > best_score) {
      best = &cand;
      best_score = score;
    }
  }
  return best ? *best : candidates.front();
}

}  // namespace metasense
