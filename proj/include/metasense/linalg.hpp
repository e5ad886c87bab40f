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

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace metasense {

// Row-major dense matrix of doubles. Embeddings are stored as floats at rest
// and promoted to this type before any arithmetic.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);
  // Ones on the leading diagonal, zeros elsewhere.
  static DenseMatrix rectangular_identity(std::size_t rows, std::size_t cols);
  static DenseMatrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  DenseMatrix transposed() const;
  bool all_finite() const;

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double frobenius_norm(const DenseMatrix& a);

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);      // A * B
DenseMatrix multiply_abt(const DenseMatrix& a, const DenseMatrix& b);  // A * B^T
DenseMatrix multiply_atb(const DenseMatrix& a, const DenseMatrix& b);  // A^T * B
std::vector<double> multiply(const DenseMatrix& a, std::span<const double> x);

/// Inner products between selected rows of an embedding matrix.
struct PipBlock {
  std::vector<std::size_t> row_ids;
  std::vector<std::size_t> col_ids;
  DenseMatrix values;
};

/// values(a, b) = <E[row_ids[a]], E[col_ids[b]]>. Row stripes are computed in
/// parallel; each element is a single sequential dot product, so the result
/// does not depend on the worker count. Throws kIndexOutOfRange.
PipBlock pip_block(const DenseMatrix& e, std::span<const std::size_t> row_ids,
                   std::span<const std::size_t> col_ids);

/// Squared Frobenius distance between two blocks over the same id lists.
double frob_sq_diff(const PipBlock& a, const PipBlock& b);

/// Cosine similarity. Throws kLengthMismatch or kZeroVector.
double cosine(std::span<const double> u, std::span<const double> v);
double cosine(std::span<const float> u, std::span<const double> v);

struct QrResult {
  DenseMatrix q;  // rows x cols, orthonormal columns
  DenseMatrix r;  // cols x cols, upper triangular
};

/// Thin Householder QR for rows >= cols. Q has orthonormal columns even when
/// the input is rank deficient.
QrResult qr_thin(const DenseMatrix& a);

struct SvdResult {
  DenseMatrix u;          // rows x k
  std::vector<double> s;  // k, non-increasing
  DenseMatrix v;          // cols x k
};

/// Thin SVD by one-sided Jacobi rotations. Meant for the small projected
/// matrices inside truncated_svd and for tests.
SvdResult jacobi_svd(const DenseMatrix& a);

/// Randomized range-finder SVD (oversampling 10, two power iterations).
/// Each right singular vector has its largest-magnitude entry non-negative.
/// Throws kRankTooLarge unless 1 <= k <= min(rows, cols).
SvdResult truncated_svd(const DenseMatrix& m, std::size_t k, std::uint64_t seed);

/// Returns A (q x p) minimising sum_i ||A x_i - y_i||^2 + lambda ||A||_F^2 for
/// X (N x p) and Y (N x q), via Cholesky on the normal equations.
/// Throws kSingularSystem when X^T X + lambda I is not positive definite.
DenseMatrix ridge_solve(const DenseMatrix& x, const DenseMatrix& y, double lambda);

}  // namespace metasense
