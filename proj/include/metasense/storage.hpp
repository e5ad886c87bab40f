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

// File formats. All multi-byte binary fields are little-endian.
//
// Embedding text:    "N d\n" then N lines "sense_id v_1 ... v_d".
// Embedding binary:  "MSE1", u32 N, u32 d, then N records of
//                    (u16 id length, id bytes, d f32).
// Context dataset:   one tab-separated record per line:
//                    instance_id, lemma, gold, candidates, v_1 ... v_dc
//                    gold is "?" (unlabeled) or keys joined by '|';
//                    candidates is "*" (look up the inventory) or keys joined
//                    by ','.
// Model:             "MSM1", u32 d, u32 n, n x (u16 name length, name,
//                    u32 d_j, d*d_j f64 row-major), f64 alpha, u64 steps,
//                    u64 seed, u8 has_companion, [u32 rows, u32 cols, f64...].
//                    n == 0 marks a file that only carries the companion.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metasense/core.hpp"
#include "metasense/linalg.hpp"

namespace metasense {

enum class EmbeddingFormat { kAuto, kText, kBinary };

/// Parses "text", "binary" or "auto". Throws kInvalidArgument.
EmbeddingFormat parse_embedding_format(std::string_view name);

std::string serialize_embeddings_text(const SourceEmbeddingSet& set);
std::string serialize_embeddings_binary(const SourceEmbeddingSet& set);
SourceEmbeddingSet parse_embeddings_text(std::string_view content, std::string name);
SourceEmbeddingSet parse_embeddings_binary(std::string_view content, std::string name);

/// kAuto picks binary when the file starts with the binary magic. The set is
/// named after the file stem unless `name` is given.
/// Throws kIoError, kParseError, kDuplicateSense.
SourceEmbeddingSet load_embeddings(const std::filesystem::path& path,
                                   EmbeddingFormat format = EmbeddingFormat::kAuto,
                                   std::optional<std::string> name = std::nullopt);
void save_embeddings(const SourceEmbeddingSet& set, const std::filesystem::path& path,
                     EmbeddingFormat format);

struct ContextInstance {
  std::string id;
  std::string lemma;
  std::vector<SenseId> gold;        // empty when unlabeled
  std::vector<SenseId> candidates;  // empty when candidates_from_inventory
  bool candidates_from_inventory = false;
  std::vector<float> context;

  bool labeled() const noexcept { return !gold.empty(); }
  bool operator==(const ContextInstance&) const = default;
};

struct ContextDataset {
  std::size_t context_dim = 0;
  std::vector<ContextInstance> instances;

  bool operator==(const ContextDataset&) const = default;
};

/// Throws kParseError, kGoldNotInCandidates.
ContextDataset parse_context_dataset(std::string_view content);
std::string serialize_context_dataset(const ContextDataset& dataset);
ContextDataset load_context_dataset(const std::filesystem::path& path);
void save_context_dataset(const ContextDataset& dataset, const std::filesystem::path& path);

struct TrainingMetadata {
  double alpha = 1.0;
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;

  bool operator==(const TrainingMetadata&) const = default;
};

struct ModelFile {
  std::optional<MetaModel> model;
  TrainingMetadata metadata;
  // Meta -> context projection learned for spaces that need one.
  std::optional<DenseMatrix> companion;

  bool operator==(const ModelFile&) const = default;
};

std::string serialize_model(const ModelFile& file);
/// Throws kParseError.
ModelFile parse_model(std::string_view content);
ModelFile load_model(const std::filesystem::path& path);
void save_model(const ModelFile& file, const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same value.
std::string format_float(float v);
std::string format_double(double v);

/// Whole-file helpers shared by the loaders. Throw kIoError.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace metasense
