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
#include "metasense/storage.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "metasense/error.hpp"

namespace metasense {

namespace {

constexpr std::string_view kEmbeddingMagic = "MSE1";
constexpr std::string_view kModelMagic = "MSM1";

[[noreturn]] void parse_fail_line(std::size_t line, const std::string& what) {
  fail(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + what);
}

[[noreturn]] void parse_fail_byte(std::size_t offset, const std::string& what) {
  fail(ErrorCode::kParseError, "byte " + std::to_string(offset) + ": " + what);
}

// Splits on runs of spaces and tabs.
std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_exact(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines = split_exact(content, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  }
  return lines;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

float parse_finite_float(std::string_view tok, std::size_t line) {
  float v = 0.0f;
  if (!parse_number(tok, v)) parse_fail_line(line, "bad number '" + std::string(tok) + "'");
  if (!std::isfinite(v)) parse_fail_line(line, "non-finite value '" + std::string(tok) + "'");
  return v;
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      parse_fail_byte(pos_, std::string("truncated ") + what);
    }
  }

  std::uint64_t uint(std::size_t bytes, const char* what) {
    need(bytes, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += bytes;
    return v;
  }

  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    const auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  float f32(const char* what) { return std::bit_cast<float>(static_cast<std::uint32_t>(uint(4, what))); }
  double f64(const char* what) { return std::bit_cast<double>(uint(8, what)); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  void uint(std::uint64_t v, std::size_t bytes) {
    for (std::size_t i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v), 4); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) fail(ErrorCode::kInvalidArgument, std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string format_float(float v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::kIoError, "read failed: " + path.string());
  return content;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) fail(ErrorCode::kIoError, "write failed: " + path.string());
}

EmbeddingFormat parse_embedding_format(std::string_view name) {
  if (name == "auto") return EmbeddingFormat::kAuto;
  if (name == "text") return EmbeddingFormat::kText;
  if (name == "binary") return EmbeddingFormat::kBinary;
  fail(ErrorCode::kInvalidArgument, "unknown embedding format '" + std::string(name) + "'");
}

std::string serialize_embeddings_text(const SourceEmbeddingSet& set) {
  std::string out = std::to_string(set.size()) + " " + std::to_string(set.dim()) + "\n";
  for (std::size_t r = 0; r < set.size(); ++r) {
    const auto& id = set.ids()[r].str();
    if (id.find_first_of(" \t\n\r") != std::string::npos) {
      fail(ErrorCode::kInvalidArgument, "sense id with whitespace cannot be stored as text: " + id);
    }
    out += id;
    for (float v : set.row(r)) {
      out += ' ';
      out += format_float(v);
    }
    out += '\n';
  }
  return out;
}

SourceEmbeddingSet parse_embeddings_text(std::string_view content, std::string name) {
  const auto lines = split_lines(content);
  if (lines.empty()) parse_fail_line(1, "missing header");
  const auto header = split_ws(lines[0]);
  std::size_t n = 0, d = 0;
  if (header.size() != 2 || !parse_number(header[0], n) || !parse_number(header[1], d)) {
    parse_fail_line(1, "header must be \"N d\"");
  }
  if (d == 0) parse_fail_line(1, "dimensionality must be positive");
  if (d > content.size()) parse_fail_line(1, "dimensionality exceeds file size");
  if (lines.size() - 1 != n) {
    parse_fail_line(lines.size(), "count mismatch: header says " + std::to_string(n) + " rows, found " +
                                      std::to_string(lines.size() - 1));
  }
  std::vector<SenseId> ids;
  std::vector<float> rows;
  ids.reserve(n);
  rows.reserve(n * d);
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto toks = split_ws(lines[i]);
    if (toks.size() != d + 1) {
      fail(ErrorCode::kDimMismatch, "line " + std::to_string(i + 1) + ": expected " +
                                        std::to_string(d) + " values, found " +
                                        std::to_string(toks.empty() ? 0 : toks.size() - 1));
    }
    if (!seen.insert(toks[0]).second) {
      fail(ErrorCode::kDuplicateSense, "line " + std::to_string(i + 1) + ": " + std::string(toks[0]));
    }
    ids.emplace_back(std::string(toks[0]));
    for (std::size_t c = 1; c <= d; ++c) rows.push_back(parse_finite_float(toks[c], i + 1));
  }
  return SourceEmbeddingSet(std::move(name), d, std::move(ids), std::move(rows));
}

std::string serialize_embeddings_binary(const SourceEmbeddingSet& set) {
  ByteWriter w;
  w.bytes(kEmbeddingMagic);
  w.uint(checked_u32(set.size(), "row count"), 4);
  w.uint(checked_u32(set.dim(), "dimensionality"), 4);
  for (std::size_t r = 0; r < set.size(); ++r) {
    const auto& id = set.ids()[r].str();
    if (id.size() > 0xffff) fail(ErrorCode::kInvalidArgument, "sense id longer than 65535 bytes");
    w.uint(id.size(), 2);
    w.bytes(id);
    for (float v : set.row(r)) w.f32(v);
  }
  return w.take();
}

SourceEmbeddingSet parse_embeddings_binary(std::string_view content, std::string name) {
  ByteReader in(content);
  if (in.bytes(4, "magic") != kEmbeddingMagic) parse_fail_byte(0, "bad magic");
  const std::size_t n = in.uint(4, "row count");
  const std::size_t d = in.uint(4, "dimensionality");
  if (d == 0) parse_fail_byte(8, "dimensionality must be positive");
  // Each record needs at least 2 + 1 + 4d bytes; reject absurd headers before
  // allocating.
  if (n > in.remaining() / (3 + 4 * d)) parse_fail_byte(4, "row count exceeds file size");
  std::vector<SenseId> ids;
  std::vector<float> rows;
  ids.reserve(n);
  rows.reserve(n * d);
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t at = in.offset();
    const std::size_t len = in.uint(2, "id length");
    if (len == 0) parse_fail_byte(at, "empty sense id");
    std::string id(in.bytes(len, "sense id"));
    if (!seen.insert(id).second) {
      fail(ErrorCode::kDuplicateSense, "byte " + std::to_string(at) + ": " + id);
    }
    for (std::size_t c = 0; c < d; ++c) {
      const std::size_t vat = in.offset();
      const float v = in.f32("vector");
      if (!std::isfinite(v)) parse_fail_byte(vat, "non-finite value");
      rows.push_back(v);
    }
    ids.emplace_back(std::move(id));
  }
  if (in.remaining() != 0) parse_fail_byte(in.offset(), "trailing bytes");
  return SourceEmbeddingSet(std::move(name), d, std::move(ids), std::move(rows));
}

SourceEmbeddingSet load_embeddings(const std::filesystem::path& path, EmbeddingFormat format,
                                   std::optional<std::string> name) {
  const std::string content = read_file(path);
  std::string label = name.value_or(path.stem().string());
  if (format == EmbeddingFormat::kAuto) {
    format = content.starts_with(kEmbeddingMagic) ? EmbeddingFormat::kBinary
                                                  : EmbeddingFormat::kText;
  }
  try {
    return format == EmbeddingFormat::kBinary ? parse_embeddings_binary(content, std::move(label))
                                              : parse_embeddings_text(content, std::move(label));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_embeddings(const SourceEmbeddingSet& set, const std::filesystem::path& path,
                     EmbeddingFormat format) {
  write_file(path, format == EmbeddingFormat::kBinary ? serialize_embeddings_binary(set)
                                                      : serialize_embeddings_text(set));
}

ContextDataset parse_context_dataset(std::string_view content) {
  ContextDataset ds;
  const auto lines = split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    const auto fields = split_exact(lines[i], '\t');
    if (fields.size() < 5) parse_fail_line(lineno, "expected at least 5 tab-separated fields");
    ContextInstance inst;
    if (fields[0].empty()) parse_fail_line(lineno, "empty instance id");
    if (fields[1].empty()) parse_fail_line(lineno, "empty lemma");
    inst.id = fields[0];
    inst.lemma = fields[1];
    if (fields[2] != "?") {
      for (auto key : split_exact(fields[2], '|')) {
        if (key.empty()) parse_fail_line(lineno, "empty gold key");
        inst.gold.emplace_back(std::string(key));
      }
    }
    if (fields[3] == "*") {
      inst.candidates_from_inventory = true;
    } else {
      for (auto key : split_exact(fields[3], ',')) {
        if (key.empty()) parse_fail_line(lineno, "empty candidate key");
        inst.candidates.emplace_back(std::string(key));
      }
      for (const auto& g : inst.gold) {
        if (std::find(inst.candidates.begin(), inst.candidates.end(), g) == inst.candidates.end()) {
          fail(ErrorCode::kGoldNotInCandidates,
               "line " + std::to_string(lineno) + ": gold " + g.str() + " not among candidates");
        }
      }
    }
    const std::size_t dc = fields.size() - 4;
    if (ds.instances.empty()) {
      ds.context_dim = dc;
    } else if (dc != ds.context_dim) {
      parse_fail_line(lineno, "context dimensionality " + std::to_string(dc) + " differs from " +
                                  std::to_string(ds.context_dim));
    }
    inst.context.reserve(dc);
    for (std::size_t c = 4; c < fields.size(); ++c) {
      inst.context.push_back(parse_finite_float(fields[c], lineno));
    }
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

std::string serialize_context_dataset(const ContextDataset& dataset) {
  std::string out;
  auto join = [](const std::vector<SenseId>& keys, char sep) {
    std::string s;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (i) s += sep;
      s += keys[i].str();
    }
    return s;
  };
  for (const auto& inst : dataset.instances) {
    if (inst.context.size() != dataset.context_dim) {
      fail(ErrorCode::kDimMismatch, "instance " + inst.id + " has context dim " +
                                        std::to_string(inst.context.size()));
    }
    out += inst.id;
    out += '\t';
    out += inst.lemma;
    out += '\t';
    out += inst.gold.empty() ? std::string("?") : join(inst.gold, '|');
    out += '\t';
    out += inst.candidates_from_inventory ? std::string("*") : join(inst.candidates, ',');
    for (float v : inst.context) {
      out += '\t';
      out += format_float(v);
    }
    out += '\n';
  }
  return out;
}

ContextDataset load_context_dataset(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  try {
    return parse_context_dataset(content);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_context_dataset(const ContextDataset& dataset, const std::filesystem::path& path) {
  write_file(path, serialize_context_dataset(dataset));
}

std::string serialize_model(const ModelFile& file) {
  if (!file.model && !file.companion) {
    fail(ErrorCode::kInvalidArgument, "model file needs a model or a companion matrix");
  }
  ByteWriter w;
  w.bytes(kModelMagic);
  if (file.model) {
    const auto& m = *file.model;
    w.uint(checked_u32(m.dim(), "output dim"), 4);
    w.uint(checked_u32(m.source_count(), "source count"), 4);
    for (std::size_t j = 0; j < m.source_count(); ++j) {
      const auto& name = m.source_names()[j];
      if (name.size() > 0xffff) fail(ErrorCode::kInvalidArgument, "source name too long");
      w.uint(name.size(), 2);
      w.bytes(name);
      const auto& p = m.projection(j);
      w.uint(checked_u32(p.cols(), "source dim"), 4);
      for (double v : p.data()) w.f64(v);
    }
  } else {
    w.uint(0, 4);
    w.uint(0, 4);
  }
  w.f64(file.metadata.alpha);
  w.uint(file.metadata.steps, 8);
  w.uint(file.metadata.seed, 8);
  w.uint(file.companion ? 1 : 0, 1);
  if (file.companion) {
    const auto& a = *file.companion;
    w.uint(checked_u32(a.rows(), "companion rows"), 4);
    w.uint(checked_u32(a.cols(), "companion cols"), 4);
    for (double v : a.data()) w.f64(v);
  }
  return w.take();
}

ModelFile parse_model(std::string_view content) {
  ByteReader in(content);
  if (in.bytes(4, "magic") != kModelMagic) parse_fail_byte(0, "bad magic");
  const std::size_t d = in.uint(4, "output dim");
  const std::size_t n = in.uint(4, "source count");
  ModelFile file;
  if (n > 0) {
    if (d == 0) parse_fail_byte(4, "output dim must be positive");
    std::vector<DenseMatrix> ps;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t len = in.uint(2, "name length");
      names.emplace_back(in.bytes(len, "source name"));
      const std::size_t at = in.offset();
      const std::size_t dj = in.uint(4, "source dim");
      if (dj == 0) parse_fail_byte(at, "source dim must be positive");
      if (dj > in.remaining() / 8 / d) parse_fail_byte(at, "projection exceeds file size");
      std::vector<double> data(d * dj);
      for (double& v : data) {
        const std::size_t vat = in.offset();
        v = in.f64("projection");
        if (!std::isfinite(v)) parse_fail_byte(vat, "non-finite projection entry");
      }
      ps.emplace_back(d, dj, std::move(data));
    }
    file.model.emplace(d, std::move(ps), std::move(names));
  } else if (d != 0) {
    parse_fail_byte(4, "output dim without projections");
  }
  file.metadata.alpha = in.f64("alpha");
  file.metadata.steps = in.uint(8, "steps");
  file.metadata.seed = in.uint(8, "seed");
  const std::size_t flag_at = in.offset();
  const std::size_t has_companion = in.uint(1, "companion flag");
  if (has_companion > 1) parse_fail_byte(flag_at, "bad companion flag");
  if (has_companion) {
    const std::size_t rows = in.uint(4, "companion rows");
    const std::size_t cols = in.uint(4, "companion cols");
    if (rows == 0 || cols == 0) parse_fail_byte(flag_at + 1, "empty companion matrix");
    if (cols > in.remaining() / 8 / rows) parse_fail_byte(flag_at + 1, "companion exceeds file size");
    std::vector<double> data(rows * cols);
    for (double& v : data) {
      const std::size_t vat = in.offset();
      v = in.f64("companion");
      if (!std::isfinite(v)) parse_fail_byte(vat, "non-finite companion entry");
    }
    file.companion.emplace(rows, cols, std::move(data));
  }
  if (!file.model && !file.companion) parse_fail_byte(8, "file holds neither model nor companion");
  if (in.remaining() != 0) parse_fail_byte(in.offset(), "trailing bytes");
  return file;
}

ModelFile load_model(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  try {
    return parse_model(content);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_model(const ModelFile& file, const std::filesystem::path& path) {
  write_file(path, serialize_model(file));
}

}  // namespace metasense
