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
// metasense command-line driver.
//
// Exit codes: 0 success, 2 usage or input error, 3 runtime or numeric failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "metasense/align.hpp"
#include "metasense/baselines.hpp"
#include "metasense/core.hpp"
#include "metasense/error.hpp"
#include "metasense/eval.hpp"
#include "metasense/npms.hpp"
#include "metasense/parallel.hpp"
#include "metasense/storage.hpp"
#include "metasense/synthetic.hpp"

namespace fs = std::filesystem;
using namespace metasense;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

// Usage errors raised after CLI parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDivergedLoss:
    case ErrorCode::kSingularSystem:
    case ErrorCode::kDegenerateBatch:
    case ErrorCode::kZeroVector:
      return kExitRuntime;
    default:
      return kExitUsage;
  }
}

std::vector<SourceEmbeddingSet> load_sources(const std::vector<std::string>& paths,
                                             EmbeddingFormat format) {
  if (paths.empty()) throw UsageError("--sources needs at least one file");
  std::vector<SourceEmbeddingSet> sources;
  for (const auto& p : paths) sources.push_back(load_embeddings(p, format));
  return sources;
}

// Inventory over every key the inputs mention; lemmas come from the key prefix.
SenseInventory inventory_for(std::span<const SourceEmbeddingSet> sources,
                             std::span<const ContextDataset* const> datasets) {
  std::vector<SenseId> keys;
  for (const auto& s : sources) keys.insert(keys.end(), s.ids().begin(), s.ids().end());
  for (const auto* d : datasets) {
    for (const auto& inst : d->instances) {
      keys.insert(keys.end(), inst.gold.begin(), inst.gold.end());
      keys.insert(keys.end(), inst.candidates.begin(), inst.candidates.end());
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return SenseInventory::from_sense_keys(std::move(keys));
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

fs::path sibling(const fs::path& base, const std::string& suffix) {
  return base.parent_path() / (base.filename().string() + suffix);
}

// std::vector<bool> has no contiguous storage to view as a span.
std::unique_ptr<bool[]> bool_array(const std::vector<bool>& v) {
  auto out = std::make_unique<bool[]>(v.size());
  std::copy(v.begin(), v.end(), out.get());
  return out;
}

void log_line(const std::string& msg) { std::cerr << msg << "\n"; }

// ---- train-npms ----

struct TrainArgs {
  std::vector<std::string> sources;
  std::string format = "auto";
  std::string dataset;
  std::string validation;
  std::string alpha = "0.5";
  std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::size_t steps = 1000;
  double lr = 0.001;
  std::size_t pip_batch = 512;
  std::size_t context_batch = 64;
  std::size_t output_dim = 0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> pip_seed;
  std::string out;
  std::string log;
};

int run_train(const TrainArgs& a) {
  const auto sources = load_sources(a.sources, parse_embedding_format(a.format));
  ContextDataset train;
  if (!a.dataset.empty()) train = load_context_dataset(a.dataset);

  TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.steps = a.steps;
  cfg.pip_batch_size = a.pip_batch;
  cfg.context_batch_size = a.context_batch;
  cfg.output_dim = a.output_dim;
  cfg.seed = a.seed;
  cfg.pip_seed = a.pip_seed;

  TrainResult result;
  if (a.alpha == "tune") {
    if (a.validation.empty()) throw UsageError("--alpha tune needs --validation");
    if (a.dataset.empty()) throw UsageError("--alpha tune needs --dataset");
    const ContextDataset valid = load_context_dataset(a.validation);
    const ContextDataset* ds[] = {&train, &valid};
    const SenseInventory inventory = inventory_for(sources, ds);
    const AlignmentIndex alignment = build_alignment(inventory, sources);
    TuneResult tuned = tune_alpha(sources, inventory, alignment, train, valid, a.grid, cfg);
    for (const auto& s : tuned.scores) {
      log_line("alpha " + format_double(s.alpha) + " validation f1 " + format_double(s.f1));
    }
    cfg.alpha = tuned.best_alpha;
    result = std::move(tuned.best);
  } else {
    try {
      std::size_t used = 0;
      cfg.alpha = std::stod(a.alpha, &used);
      if (used != a.alpha.size()) throw std::invalid_argument(a.alpha);
    } catch (const std::exception&) {
      throw UsageError("--alpha must be a number in [0, 1] or 'tune'");
    }
    if (cfg.alpha < 1.0 && a.dataset.empty()) throw UsageError("alpha < 1 needs --dataset");
    const ContextDataset* ds[] = {&train};
    const SenseInventory inventory = inventory_for(sources, ds);
    const AlignmentIndex alignment = build_alignment(inventory, sources);
    result = train_npms(sources, train, alignment, cfg);
  }
  if (result.skipped_instances > 0) {
    log_line("skipped " + std::to_string(result.skipped_instances) +
             " unlabeled or uncovered training instances");
  }

  ModelFile file;
  file.model = std::move(result.model);
  file.metadata = {cfg.alpha, cfg.steps, cfg.seed};
  save_model(file, a.out);
  const fs::path log_path = a.log.empty() ? sibling(a.out, ".log") : fs::path(a.log);
  write_file(log_path, format_training_log(result.log));
  if (!result.log.empty()) {
    log_line("alpha " + format_double(cfg.alpha) + " initial loss " +
             format_double(result.log.front().scaled_total) + " final loss " +
             format_double(result.log.back().scaled_total));
  }
  return kExitOk;
}

// ---- combine ----

struct CombineArgs {
  std::string method;
  std::vector<std::string> sources;
  std::string format = "auto";
  std::string out_format = "text";
  std::size_t k = 0;
  std::size_t latent_dim = 0;
  std::size_t steps = 1000;
  double lr = 0.01;
  std::string init = "random";
  std::uint64_t seed = 0;
  bool normalize = false;
  std::string out;
};

int run_combine(const CombineArgs& a) {
  const auto sources = load_sources(a.sources, parse_embedding_format(a.format));
  const SenseInventory inventory = inventory_for(sources, {});
  const AlignmentIndex alignment = build_alignment(inventory, sources);
  const CombineOptions opts{a.normalize};
  SourceEmbeddingSet out;
  if (a.method == "avg") {
    out = meta_avg(sources, alignment, opts);
  } else if (a.method == "conc") {
    out = meta_conc(sources, alignment, opts);
  } else if (a.method == "svd") {
    if (a.k == 0) throw UsageError("svd needs --k");
    out = meta_svd(sources, alignment, a.k, a.seed, opts);
  } else {
    AemeConfig cfg;
    cfg.latent_dim = a.latent_dim;
    if (cfg.latent_dim == 0) {
      for (const auto& s : sources) cfg.latent_dim = std::max(cfg.latent_dim, s.dim());
    }
    cfg.steps = a.steps;
    cfg.learning_rate = a.lr;
    cfg.seed = a.seed;
    cfg.init = a.init == "identity" ? AemeInit::kIdentity : AemeInit::kRandom;
    cfg.normalize_inputs = a.normalize;
    out = train_aeme(sources, alignment, cfg).embeddings;
  }
  save_embeddings(out, a.out, parse_embedding_format(a.out_format));
  return kExitOk;
}

// ---- project ----

struct ProjectArgs {
  std::string meta;
  std::string dataset;
  double lambda = 1e-3;
  std::string solver = "closed";
  std::size_t steps = 2000;
  double lr = 0.1;
  std::string out;
};

int run_project(const ProjectArgs& a) {
  const SourceEmbeddingSet meta = load_embeddings(a.meta);
  const ContextDataset dataset = load_context_dataset(a.dataset);
  ProjectionOptions opts;
  opts.lambda = a.lambda;
  opts.solver = a.solver == "gd" ? ProjectionSolver::kGradientDescent : ProjectionSolver::kClosedForm;
  opts.steps = a.steps;
  opts.learning_rate = a.lr;
  ModelFile file;
  file.companion = learn_context_projection(meta, dataset, opts);
  save_model(file, a.out);
  log_line("objective " + format_double(projection_objective(*file.companion, meta, dataset, a.lambda)));
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  std::string task = "wsd";
  std::string embeddings;
  std::string model;
  std::vector<std::string> sources;
  std::string format = "auto";
  std::vector<std::string> datasets;
  std::string wic_train;
  std::string projection;
  bool tile = false;
  std::string report;
  std::string keys_dir;
};

int run_eval(const EvalArgs& a) {
  if (a.embeddings.empty() == a.model.empty()) {
    throw UsageError("give exactly one of --embeddings and --model");
  }
  if (a.datasets.empty()) throw UsageError("--datasets needs at least one file");
  std::vector<ContextDataset> datasets;
  for (const auto& p : a.datasets) datasets.push_back(load_context_dataset(p));

  SourceEmbeddingSet senses;
  std::optional<DenseMatrix> projection;
  std::vector<const ContextDataset*> ds_ptrs;
  for (const auto& d : datasets) ds_ptrs.push_back(&d);

  if (!a.embeddings.empty()) {
    senses = load_embeddings(a.embeddings, parse_embedding_format(a.format));
  } else {
    ModelFile file = load_model(a.model);
    if (!file.model) throw UsageError(a.model + " holds no projections");
    const auto sources = load_sources(a.sources, parse_embedding_format(a.format));
    const SenseInventory inv = inventory_for(sources, {});
    senses = materialize(*file.model, sources, build_alignment(inv, sources));
    projection = std::move(file.companion);
  }
  if (!a.projection.empty()) {
    ModelFile file = load_model(a.projection);
    if (!file.companion) throw UsageError(a.projection + " holds no projection matrix");
    projection = std::move(file.companion);
  }
  ScoringOptions opts;
  opts.projection = projection ? &*projection : nullptr;
  opts.tile = a.tile;

  const std::vector<SenseId> meta_keys(senses.ids().begin(), senses.ids().end());
  std::vector<ReportRow> rows;
  const fs::path keys_dir = a.keys_dir.empty() ? fs::path(a.report).parent_path() : fs::path(a.keys_dir);

  if (a.task == "wsd") {
    const SenseInventory inventory = [&] {
      std::vector<SenseId> keys = meta_keys;
      for (const auto* d : ds_ptrs) {
        for (const auto& inst : d->instances) {
          keys.insert(keys.end(), inst.gold.begin(), inst.gold.end());
          keys.insert(keys.end(), inst.candidates.begin(), inst.candidates.end());
        }
      }
      std::sort(keys.begin(), keys.end());
      keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
      return SenseInventory::from_sense_keys(std::move(keys));
    }();
    WsdScore pooled;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
      const auto instances = to_wsd_instances(datasets[i], inventory);
      for (const auto& inst : instances) {
        if (inst.gold.empty()) throw UsageError(a.datasets[i] + ": instance " + inst.id + " has no gold sense");
      }
      const auto preds = wsd_predict_all(instances, senses, opts);
      const WsdScore score = wsd_score(preds, instances);
      pooled.correct += score.correct;
      pooled.total += score.total;
      pooled.backoff += score.backoff;
      const std::string name = stem_of(a.datasets[i]);
      rows.push_back({name, "f1", score.f1(), score.backoff});
      write_file(keys_dir / (name + ".key"), format_key_file(preds));
      write_file(keys_dir / (name + ".predictions.tsv"), format_predictions(preds));
    }
    rows.push_back({"ALL", "f1", pooled.f1(), pooled.backoff});
  } else {
    if (a.wic_train.empty()) throw UsageError("--task wic needs --wic-train");
    const SenseInventory inventory = SenseInventory::from_sense_keys(meta_keys);
    auto featurize = [&](const std::vector<WicInstance>& insts, const std::string& where,
                         std::vector<WicFeatures>& feats, std::vector<bool>& labels) {
      for (const auto& inst : insts) {
        if (!inst.label) throw UsageError(where + ": pair " + inst.id + " has no label");
        const auto [s1, s2] = wic_disambiguate(inst, inventory, senses, opts);
        feats.push_back(wic_features(inst, s1, s2, senses, opts));
        labels.push_back(*inst.label);
      }
    };
    std::vector<WicFeatures> train_x;
    std::vector<bool> train_y;
    featurize(to_wic_instances(load_context_dataset(a.wic_train)), a.wic_train, train_x, train_y);
    const auto train_labels = bool_array(train_y);
    const LogRegFit fit = train_logreg(train_x, {train_labels.get(), train_y.size()});

    std::size_t correct = 0, total = 0;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
      std::vector<WicFeatures> x;
      std::vector<bool> y;
      featurize(to_wic_instances(datasets[i]), a.datasets[i], x, y);
      const auto labels = bool_array(y);
      const double acc = wic_accuracy(fit.model, x, {labels.get(), y.size()});
      for (std::size_t t = 0; t < y.size(); ++t) correct += fit.model.predict(x[t]) == y[t];
      total += y.size();
      rows.push_back({stem_of(a.datasets[i]), "accuracy", acc, 0});
    }
    rows.push_back({"ALL", "accuracy", total == 0 ? 0.0 : static_cast<double>(correct) / total, 0});
  }
  write_file(a.report, format_report(rows));
  return kExitOk;
}

// ---- gen-synthetic ----

int run_gen(const std::string& spec_path, const std::string& out_dir) {
  const WorldSpec spec = parse_world_spec(read_file(spec_path));
  const SyntheticWorld world = gen_world(spec);
  persist_world(world, out_dir);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metasense: meta-sense embeddings from multiple source sense embeddings"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")
      ->envname("METASENSE_THREADS");

  const auto formats = CLI::IsMember({"auto", "text", "binary"});

  TrainArgs ta;
  auto* train = app.add_subcommand("train-npms", "Learn NPMS projections");
  train->add_option("--sources", ta.sources, "Source embedding files")->required()->delimiter(',');
  train->add_option("--format", ta.format, "Source file format")->check(formats);
  train->add_option("--dataset", ta.dataset, "Sense-annotated context dataset");
  train->add_option("--validation", ta.validation, "Validation dataset for --alpha tune");
  train->add_option("--alpha", ta.alpha, "Loss weight in [0, 1] or 'tune'")
      ->envname("METASENSE_ALPHA");
  train->add_option("--grid", ta.grid, "Alpha values tried by --alpha tune")->delimiter(',');
  train->add_option("--steps", ta.steps, "SGD steps")->envname("METASENSE_STEPS");
  train->add_option("--lr", ta.lr, "Learning rate")->envname("METASENSE_LR");
  train->add_option("--pip-batch", ta.pip_batch, "Senses per PIP batch")->envname("METASENSE_PIP_BATCH");
  train->add_option("--context-batch", ta.context_batch, "Contexts per batch")
      ->envname("METASENSE_CONTEXT_BATCH");
  train->add_option("--output-dim", ta.output_dim, "Meta dimensionality (0 = context dim)");
  train->add_option("--seed", ta.seed, "Random seed")->envname("METASENSE_SEED");
  train->add_option("--pip-seed", ta.pip_seed, "Seed of the PIP batch stream");
  train->add_option("--out", ta.out, "Output model file")->required();
  train->add_option("--log", ta.log, "Training log (default: <out>.log)");

  CombineArgs ca;
  auto* combine = app.add_subcommand("combine", "Combine sources with a baseline method");
  combine->add_option("--method", ca.method, "Combination method")
      ->required()
      ->check(CLI::IsMember({"avg", "conc", "svd", "aeme"}));
  combine->add_option("--sources", ca.sources, "Source embedding files")->required()->delimiter(',');
  combine->add_option("--format", ca.format, "Source file format")->check(formats);
  combine->add_option("--out-format", ca.out_format, "Output file format")
      ->check(CLI::IsMember({"text", "binary"}));
  combine->add_option("--k", ca.k, "SVD rank");
  combine->add_option("--latent-dim", ca.latent_dim, "AEME latent size (0 = largest source dim)");
  combine->add_option("--steps", ca.steps, "AEME steps")->envname("METASENSE_STEPS");
  combine->add_option("--lr", ca.lr, "AEME learning rate")->envname("METASENSE_LR");
  combine->add_option("--init", ca.init, "AEME initialisation")
      ->check(CLI::IsMember({"random", "identity"}));
  combine->add_option("--seed", ca.seed, "Random seed")->envname("METASENSE_SEED");
  combine->add_flag("--normalize", ca.normalize, "L2-normalise source vectors first");
  combine->add_option("--out", ca.out, "Output embedding file")->required();

  ProjectArgs pa;
  auto* project = app.add_subcommand("project", "Learn a meta -> context projection");
  project->add_option("--meta", pa.meta, "Meta embedding file")->required();
  project->add_option("--dataset", pa.dataset, "Sense-annotated context dataset")->required();
  project->add_option("--lambda", pa.lambda, "Ridge penalty")->envname("METASENSE_LAMBDA");
  project->add_option("--solver", pa.solver, "Solver")->check(CLI::IsMember({"closed", "gd"}));
  project->add_option("--steps", pa.steps, "Gradient-descent steps");
  project->add_option("--lr", pa.lr, "Gradient-descent learning rate");
  project->add_option("--out", pa.out, "Output matrix file")->required();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate on WSD or WiC datasets");
  eval->add_option("--task", ea.task, "Task")->check(CLI::IsMember({"wsd", "wic"}));
  eval->add_option("--embeddings", ea.embeddings, "Sense embedding file");
  eval->add_option("--model", ea.model, "NPMS model file (needs --sources)");
  eval->add_option("--sources", ea.sources, "Source files for --model")->delimiter(',');
  eval->add_option("--format", ea.format, "Embedding file format")->check(formats);
  eval->add_option("--datasets", ea.datasets, "Evaluation datasets")->required()->delimiter(',');
  eval->add_option("--wic-train", ea.wic_train, "Labeled WiC pairs for the classifier");
  eval->add_option("--projection", ea.projection, "Projection matrix file");
  eval->add_flag("--tile", ea.tile, "Tile context vectors to the sense dimensionality");
  eval->add_option("--report", ea.report, "Report TSV")->required();
  eval->add_option("--keys-dir", ea.keys_dir, "Directory for key files (default: report dir)");

  std::string spec_path, out_dir;
  auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic world");
  gen->add_option("--spec", spec_path, "JSON world spec")->required();
  gen->add_option("--out-dir", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (threads > 0) set_thread_count(threads);
    if (*train) return run_train(ta);
    if (*combine) return run_combine(ca);
    if (*project) return run_project(pa);
    if (*eval) return run_eval(ea);
    if (*gen) return run_gen(spec_path, out_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
