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
#include <cmath>
#include <numeric>
#include <random>

#include "metasense/eval.hpp"
#include "metasense/npms.hpp"
#include "metasense/parallel.hpp"
#include "metasense/synthetic.hpp"
#include "test_util.hpp"

using namespace metasense;
using testutil::make_set;

namespace {

SenseInventory inventory_of(std::vector<std::string> keys) {
  std::vector<SenseId> ids;
  for (auto& k : keys) ids.emplace_back(k);
  return SenseInventory::from_sense_keys(ids);
}

std::vector<std::size_t> all_positions(const AlignmentIndex& al) {
  std::vector<std::size_t> p(al.size());
  std::iota(p.begin(), p.end(), 0);
  return p;
}

double max_rel_err(const std::vector<DenseMatrix>& got, const std::vector<DenseMatrix>& want) {
  double scale = 0.0, err = 0.0;
  for (std::size_t j = 0; j < got.size(); ++j) {
    for (std::size_t i = 0; i < got[j].size(); ++i) {
      scale = std::max(scale, std::abs(want[j].data()[i]));
      err = std::max(err, std::abs(got[j].data()[i] - want[j].data()[i]));
    }
  }
  return scale == 0.0 ? err : err / scale;
}

WorldSpec two_source_world() {
  WorldSpec spec;
  spec.seed = 11;
  spec.n_words = 20;
  spec.min_senses = spec.max_senses = 3;
  spec.latent_dim = 6;
  spec.contexts_per_sense = 3;
  spec.sources = {{"s1", 6, 0.0, 1.0, true}, {"s2", 8, 0.0, 0.7, true}};
  return spec;
}

struct Fixture {
  SyntheticWorld world;
  AlignmentIndex alignment;
  explicit Fixture(const WorldSpec& spec)
      : world(gen_world(spec)), alignment(build_alignment(world.inventory, world.sources)) {}
};

}  // namespace

TEST_CASE("loss scaling") {
  LossScales scales;
  CHECK_FALSE(scales.has_pip());
  CHECK(scales.pip() > 0.0);
  scales.update_pip(4.0);
  scales.update_cont(2.0);
  CHECK(scales.pip() == 4.0);
  CHECK(scales.cont() == 2.0);
  scales.update_pip(5.0);
  CHECK(scales.pip() == doctest::Approx(0.99 * 4.0 + 0.01 * 5.0));
  SUBCASE("equal to the running means") {
    CHECK(total_loss(4.01, 1.0, scales, 0.5) == doctest::Approx(1.0));
  }
  SUBCASE("alpha switches") {
    CHECK(total_loss(3.0, 0.5, scales, 1.0) == total_loss(3.0, -0.9, scales, 1.0));
    CHECK(total_loss(3.0, 0.5, scales, 0.0) == total_loss(1e9, 0.5, scales, 0.0));
    CHECK(total_loss(3.0, std::nan(""), scales, 1.0) == total_loss(3.0, 0.0, scales, 1.0));
  }
  LossScales zero;
  zero.update_pip(0.0);
  CHECK(zero.pip() > 0.0);
}

TEST_CASE("TrainConfig validation") {
  TrainConfig c;
  c.alpha = 1.5;
  CHECK_ERROR_CODE(c.validate(), ErrorCode::kInvalidArgument);
  c = {};
  c.pip_batch_size = 1;
  CHECK_ERROR_CODE(c.validate(), ErrorCode::kInvalidArgument);
  c = {};
  c.learning_rate = 0.0;
  CHECK_ERROR_CODE(c.validate(), ErrorCode::kInvalidArgument);
}

TEST_CASE("pip_loss_batch") {
  SUBCASE("identity model over one square source") {
    std::vector<SourceEmbeddingSet> src = {testutil::random_set("s", 4, {"a", "b", "c"}, 1)};
    const auto al = build_alignment(inventory_of({"a", "b", "c"}), src);
    const auto r = pip_loss_batch(src, MetaModel::identity(4, src), al, all_positions(al));
    CHECK(r.loss == 0.0);
    for (double g : r.grads[0].data()) CHECK(g == 0.0);
  }
  SUBCASE("orthogonal projection") {
    std::vector<SourceEmbeddingSet> src = {testutil::random_set("s", 4, {"a", "b", "c", "d"}, 2)};
    const auto al = build_alignment(inventory_of({"a", "b", "c", "d"}), src);
    const MetaModel model(4, {qr_thin(testutil::random_matrix(4, 4, 3)).q}, {"s"});
    CHECK(pip_loss_batch(src, model, al, all_positions(al)).loss < 1e-20);
  }
  SUBCASE("two-sense toy") {
    // X = I, M = diag(2,1): PIP(M) = diag(4,1), residual 3 on one entry.
    std::vector<SourceEmbeddingSet> src = {make_set("s", 2, {"a", "b"}, {1, 0, 0, 1})};
    const auto al = build_alignment(inventory_of({"a", "b"}), src);
    const MetaModel model(2, {DenseMatrix::from_rows({{2, 0}, {0, 1}})}, {"s"});
    const auto batch = all_positions(al);
    const auto r = pip_loss_batch(src, model, al, batch);
    CHECK(r.loss == 9.0);
    CHECK(oracle_pip_loss(src, model, al) == 9.0);
    const auto fd = oracle_grad_fd(
        [&](const MetaModel& m) { return pip_loss_batch(src, m, al, batch).loss; }, model);
    CHECK(max_rel_err(r.grads, fd) < 1e-5);
  }
  SUBCASE("full batch equals the dense oracle") {
    Fixture f(two_source_world());
    const MetaModel model(6, {testutil::random_matrix(6, 6, 4), testutil::random_matrix(6, 8, 5)},
                          {"s1", "s2"});
    const double got = pip_loss_batch(f.world.sources, model, f.alignment, all_positions(f.alignment)).loss;
    const double want = oracle_pip_loss(f.world.sources, model, f.alignment);
    CHECK(std::abs(got - want) <= 1e-9 * want);
  }
  SUBCASE("degenerate and invalid batches") {
    std::vector<SourceEmbeddingSet> src = {make_set("s1", 1, {"a"}, {1}), make_set("s2", 1, {"b"}, {1})};
    const auto al = build_alignment(inventory_of({"a", "b"}), src);
    const MetaModel model = MetaModel::identity(1, src);
    CHECK_ERROR_CODE(pip_loss_batch(src, model, al, all_positions(al)), ErrorCode::kDegenerateBatch);
    const std::vector<std::size_t> bad = {0, 7};
    CHECK_ERROR_CODE(pip_loss_batch(src, model, al, bad), ErrorCode::kIndexOutOfRange);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    WorldSpec spec;
    spec.seed = 100 + seed;
    spec.n_words = 3;
    spec.min_senses = 1;
    spec.max_senses = 2;
    spec.latent_dim = 3;
    spec.context_dim = 4;
    spec.contexts_per_sense = 2;
    spec.context_noise_sigma = 0.3;
    spec.sources = {{"a", 4, 0.2, 1.0, true}, {"b", 5, 0.2, 0.6, true}};
    Fixture f(spec);
    const auto& src = f.world.sources;
    const MetaModel model(4, {testutil::random_matrix(4, 4, seed), testutil::random_matrix(4, 5, seed + 50)},
                          {"a", "b"});
    const auto batch = all_positions(f.alignment);
    const auto pip = pip_loss_batch(src, model, f.alignment, batch);
    const auto pip_fd = oracle_grad_fd(
        [&](const MetaModel& m) { return pip_loss_batch(src, m, f.alignment, batch).loss; }, model);
    CHECK(max_rel_err(pip.grads, pip_fd) < 1e-4);

    const auto& inst = f.world.train.instances;
    const auto cont = context_loss_batch(model, src, f.alignment, std::span<const ContextInstance>(inst));
    const auto cont_fd = oracle_grad_fd(
        [&](const MetaModel& m) {
          return context_loss_batch(m, src, f.alignment, std::span<const ContextInstance>(inst)).loss;
        },
        model);
    CHECK(max_rel_err(cont.grads, cont_fd) < 1e-4);
    CHECK(cont.loss >= -1.0);
    CHECK(cont.loss <= 1.0);
  }
}

TEST_CASE("context_loss_batch") {
  std::vector<SourceEmbeddingSet> src = {make_set("s", 2, {"a%1", "a%2"}, {1, 2, 3, -1})};
  const auto al = build_alignment(inventory_of({"a%1", "a%2"}), src);
  const MetaModel model = MetaModel::identity(2, src);
  auto instance = [](const char* gold, std::vector<float> f) {
    ContextInstance inst;
    inst.id = "i";
    inst.lemma = "a";
    inst.gold = {SenseId(gold)};
    inst.candidates_from_inventory = true;
    inst.context = std::move(f);
    return inst;
  };
  auto loss_of = [&](std::vector<ContextInstance> insts) {
    return context_loss_batch(model, src, al, std::span<const ContextInstance>(insts)).loss;
  };
  CHECK(loss_of({instance("a%1", {2, 4}), instance("a%2", {0.3f, -0.1f})}) == doctest::Approx(-1.0));
  CHECK(loss_of({instance("a%1", {-2, 1})}) == doctest::Approx(0.0));
  CHECK(loss_of({instance("a%1", {-1, -2})}) == doctest::Approx(1.0));
  CHECK_ERROR_CODE(loss_of({instance("a%1", {1, 2, 3})}), ErrorCode::kDimMismatch);
  CHECK_ERROR_CODE(loss_of({instance("b%1", {1, 2})}), ErrorCode::kSenseUncovered);
  CHECK_ERROR_CODE(loss_of({instance("a%1", {0, 0})}), ErrorCode::kZeroVector);
  ContextInstance unlabeled = instance("a%1", {1, 1});
  unlabeled.gold.clear();
  CHECK_ERROR_CODE(loss_of({unlabeled}), ErrorCode::kSenseUncovered);
}

TEST_CASE("train_npms") {
  SUBCASE("identity is a fixed point for one square source") {
    std::vector<SourceEmbeddingSet> src = {testutil::random_set("s", 3, {"a", "b", "c", "d"}, 6)};
    const auto al = build_alignment(inventory_of({"a", "b", "c", "d"}), src);
    TrainConfig cfg;
    cfg.alpha = 1.0;
    cfg.steps = 20;
    cfg.pip_batch_size = 3;
    const auto r = train_npms(src, ContextDataset{}, al, cfg);
    CHECK(r.log.front().pip_loss == 0.0);
    CHECK(r.model == MetaModel::identity(3, src));
  }
  SUBCASE("PIP loss falls on a rotated two-source world") {
    Fixture f(two_source_world());
    TrainConfig cfg;
    cfg.alpha = 1.0;
    cfg.steps = 400;
    cfg.learning_rate = 0.05;
    cfg.pip_batch_size = 16;
    cfg.output_dim = 6;
    const auto r = train_npms(f.world.sources, ContextDataset{}, f.alignment, cfg);
    const std::size_t tenth = cfg.steps / 10;
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < tenth; ++i) {
      head += r.log[i].pip_loss;
      tail += r.log[cfg.steps - 1 - i].pip_loss;
    }
    CHECK(tail < 0.5 * head);
  }
  SUBCASE("deterministic and independent of the worker count") {
    Fixture f(two_source_world());
    TrainConfig cfg;
    cfg.alpha = 0.5;
    cfg.steps = 50;
    cfg.learning_rate = 0.01;
    cfg.pip_batch_size = 20;
    cfg.context_batch_size = 8;
    set_thread_count(1);
    const auto a = train_npms(f.world.sources, f.world.train, f.alignment, cfg);
    set_thread_count(4);
    const auto b = train_npms(f.world.sources, f.world.train, f.alignment, cfg);
    set_thread_count(0);
    CHECK(a.model == b.model);
    CHECK(format_training_log(a.log) == format_training_log(b.log));
    cfg.seed = 1;
    CHECK_FALSE(train_npms(f.world.sources, f.world.train, f.alignment, cfg).model == a.model);
  }
  SUBCASE("alpha = 1 ignores the contexts") {
    Fixture f(two_source_world());
    TrainConfig cfg;
    cfg.alpha = 1.0;
    cfg.steps = 30;
    cfg.pip_batch_size = 10;
    cfg.learning_rate = 0.01;
    ContextDataset noisy = f.world.train;
    std::mt19937_64 rng(1);
    std::shuffle(noisy.instances.begin(), noisy.instances.end(), rng);
    for (auto& inst : noisy.instances)
      for (float& v : inst.context) v = -3.0f * v + 1.0f;
    CHECK(train_npms(f.world.sources, f.world.train, f.alignment, cfg).model ==
          train_npms(f.world.sources, noisy, f.alignment, cfg).model);
  }
  SUBCASE("alpha = 0 ignores the PIP batch stream") {
    Fixture f(two_source_world());
    TrainConfig cfg;
    cfg.alpha = 0.0;
    cfg.steps = 30;
    cfg.learning_rate = 0.01;
    cfg.context_batch_size = 8;
    cfg.pip_seed = 1;
    const auto a = train_npms(f.world.sources, f.world.train, f.alignment, cfg);
    cfg.pip_seed = 999;
    const auto b = train_npms(f.world.sources, f.world.train, f.alignment, cfg);
    CHECK(a.model == b.model);
    CHECK(a.log.front().pip_loss == 0.0);
  }
  SUBCASE("failures") {
    Fixture f(two_source_world());
    TrainConfig cfg;
    cfg.alpha = 1.0;
    cfg.steps = 100;
    cfg.learning_rate = 1e300;
    cfg.pip_batch_size = 10;
    cfg.output_dim = 6;
    CHECK_ERROR_CODE(train_npms(f.world.sources, ContextDataset{}, f.alignment, cfg), ErrorCode::kDivergedLoss);
    cfg.alpha = 0.5;
    cfg.learning_rate = 0.01;
    CHECK_ERROR_CODE(train_npms(f.world.sources, ContextDataset{}, f.alignment, cfg),
                     ErrorCode::kInvalidArgument);
    cfg.output_dim = 5;
    CHECK_ERROR_CODE(train_npms(f.world.sources, f.world.train, f.alignment, cfg), ErrorCode::kDimMismatch);

    std::vector<SourceEmbeddingSet> lonely = {make_set("s1", 1, {"a"}, {1}), make_set("s2", 1, {"b"}, {1})};
    const auto al = build_alignment(inventory_of({"a", "b"}), lonely);
    TrainConfig deg;
    deg.alpha = 1.0;
    deg.steps = 1;
    deg.pip_batch_size = 2;
    CHECK_ERROR_CODE(train_npms(lonely, ContextDataset{}, al, deg), ErrorCode::kDegenerateBatch);
  }
  SUBCASE("unlabeled and uncovered contexts are skipped") {
    Fixture f(two_source_world());
    ContextDataset ds = f.world.train;
    ds.instances[0].gold.clear();
    ds.instances[1].gold = {SenseId("zzz%1")};
    TrainConfig cfg;
    cfg.alpha = 0.0;
    cfg.steps = 2;
    const auto r = train_npms(f.world.sources, ds, f.alignment, cfg);
    CHECK(r.skipped_instances == 2);
  }
}

TEST_CASE("training log format") {
  const std::vector<TrainLogRecord> log = {{0, 1.5, -0.25, 1.0}, {1, 0.0, 0.0, 0.5}};
  CHECK(format_training_log(log) == "0\t1.5\t-0.25\t1\n1\t0\t0\t0.5\n");
}

TEST_CASE("tune_alpha") {
  WorldSpec spec = two_source_world();
  for (auto& s : spec.sources) s.rotate = false;
  spec.sources[1].dim = 6;
  spec.sources[1].coverage_fraction = 1.0;
  Fixture f(spec);
  TrainConfig cfg;
  cfg.steps = 300;
  cfg.learning_rate = 0.1;
  cfg.pip_batch_size = 16;
  cfg.context_batch_size = 16;

  SUBCASE("singleton grid") {
    const std::vector<double> grid = {0.5};
    CHECK(tune_alpha(f.world.sources, f.world.inventory, f.alignment, f.world.train, f.world.eval, grid, cfg)
              .best_alpha == 0.5);
  }
  SUBCASE("ties go to the smaller alpha") {
    // Without updates every alpha keeps the identity model, which already
    // solves the task on unrotated noise-free sources.
    const std::vector<double> grid = {1.0, 0.5, 0.0};
    cfg.steps = 0;
    const auto r = tune_alpha(f.world.sources, f.world.inventory, f.alignment, f.world.train,
                              f.world.eval, grid, cfg);
    for (const auto& s : r.scores) CHECK(s.f1 == 1.0);
    CHECK(r.best_alpha == 0.0);
  }
  SUBCASE("noise-only contexts favour the PIP loss") {
    ContextDataset noise = f.world.train;
    std::mt19937_64 rng(3);
    std::normal_distribution<float> g(0.0f, 1.0f);
    for (auto& inst : noise.instances)
      for (float& v : inst.context) v = g(rng);
    const std::vector<double> grid = {0.0, 0.5, 1.0};
    cfg.steps = 1000;
    cfg.learning_rate = 0.5;
    cfg.context_batch_size = 8;
    const auto r = tune_alpha(f.world.sources, f.world.inventory, f.alignment, noise, f.world.eval, grid, cfg);
    CHECK(r.best_alpha == 1.0);
    CHECK(r.scores[2].f1 > r.scores[0].f1);
    CHECK(r.scores[2].f1 > r.scores[1].f1);
  }
  SUBCASE("invalid grids") {
    const std::vector<double> empty, bad = {1.5};
    CHECK_ERROR_CODE(tune_alpha(f.world.sources, f.world.inventory, f.alignment, f.world.train,
                                f.world.eval, empty, cfg),
                     ErrorCode::kInvalidArgument);
    CHECK_ERROR_CODE(tune_alpha(f.world.sources, f.world.inventory, f.alignment, f.world.train,
                                f.world.eval, bad, cfg),
                     ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("positive rescaling of meta vectors keeps every prediction") {
  Fixture f(two_source_world());
  TrainConfig cfg;
  cfg.alpha = 0.5;
  cfg.steps = 50;
  cfg.learning_rate = 0.05;
  cfg.pip_batch_size = 16;
  cfg.context_batch_size = 16;
  const auto r = train_npms(f.world.sources, f.world.train, f.alignment, cfg);
  const SourceEmbeddingSet meta = materialize(r.model, f.world.sources, f.alignment);
  std::vector<float> scaled(meta.data().begin(), meta.data().end());
  for (float& v : scaled) v *= 7.5f;
  const SourceEmbeddingSet big("meta", meta.dim(), {meta.ids().begin(), meta.ids().end()}, scaled);
  const auto inst = to_wsd_instances(f.world.eval, f.world.inventory);
  const auto a = wsd_predict_all(inst, meta), b = wsd_predict_all(inst, big);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].sense == b[i].sense);
}
