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
#include "metasense/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "metasense/error.hpp"
#include "metasense/parallel.hpp"

namespace metasense {

namespace {

// Rows per worker below which threading costs more than it saves.
constexpr std::size_t kRowChunk = 32;

std::string shape_str(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorCode::kShapeMismatch, "data length " + std::to_string(data_.size()) +
                                        " does not match " + std::to_string(rows) +
                                        "x" + std::to_string(cols));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) { return rectangular_identity(n, n); }

DenseMatrix DenseMatrix::rectangular_identity(std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < std::min(rows, cols); ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorCode::kShapeMismatch, "ragged initializer");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double frobenius_norm(const DenseMatrix& a) { return norm2(a.data()); }

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::kShapeMismatch, shape_str(a) + " * " + shape_str(b));
  }
  DenseMatrix out(a.rows(), b.cols());
  parallel_for(0, a.rows(), [&](std::size_t i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto src = b.row(k);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += aik * src[j];
    }
  }, kRowChunk);
  return out;
}

DenseMatrix multiply_abt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    fail(ErrorCode::kShapeMismatch, shape_str(a) + " * " + shape_str(b) + "^T");
  }
  DenseMatrix out(a.rows(), b.rows());
  parallel_for(0, a.rows(), [&](std::size_t i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }, kRowChunk);
  return out;
}

DenseMatrix multiply_atb(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    fail(ErrorCode::kShapeMismatch, shape_str(a) + "^T * " + shape_str(b));
  }
  DenseMatrix out(a.cols(), b.cols());
  parallel_for(0, a.cols(), [&](std::size_t i) {
    auto dst = out.row(i);
    for (std::size_t r = 0; r < a.rows(); ++r) {
      const double ari = a(r, i);
      if (ari == 0.0) continue;
      const auto src = b.row(r);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += ari * src[j];
    }
  }, kRowChunk);
  return out;
}

std::vector<double> multiply(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    fail(ErrorCode::kShapeMismatch,
         shape_str(a) + " * vector of length " + std::to_string(x.size()));
  }
  std::vector<double> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
  return out;
}

PipBlock pip_block(const DenseMatrix& e, std::span<const std::size_t> row_ids,
                   std::span<const std::size_t> col_ids) {
  for (auto ids : {row_ids, col_ids}) {
    for (std::size_t id : ids) {
      if (id >= e.rows()) {
        fail(ErrorCode::kIndexOutOfRange, "row " + std::to_string(id) + " of " +
                                              std::to_string(e.rows()));
      }
    }
  }
  PipBlock block{{row_ids.begin(), row_ids.end()},
                 {col_ids.begin(), col_ids.end()},
                 DenseMatrix(row_ids.size(), col_ids.size())};
  parallel_for(0, row_ids.size(), [&](std::size_t a) {
    const auto lhs = e.row(row_ids[a]);
    for (std::size_t b = 0; b < col_ids.size(); ++b) {
      block.values(a, b) = dot(lhs, e.row(col_ids[b]));
    }
  }, kRowChunk);
  return block;
}

double frob_sq_diff(const PipBlock& a, const PipBlock& b) {
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols() ||
      a.row_ids != b.row_ids || a.col_ids != b.col_ids) {
    fail(ErrorCode::kShapeMismatch,
         shape_str(a.values) + " vs " + shape_str(b.values) + " (or id lists differ)");
  }
  double acc = 0.0;
  const auto x = a.values.data();
  const auto y = b.values.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

namespace {

template <typename T>
double cosine_impl(std::span<const T> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    fail(ErrorCode::kLengthMismatch,
         std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i];
    uv += a * v[i];
    uu += a * a;
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) fail(ErrorCode::kZeroVector, "cosine of a zero vector");
  const double c = uv / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
  return cosine_impl(u, v);
}

double cosine(std::span<const float> u, std::span<const double> v) {
  return cosine_impl(u, v);
}

QrResult qr_thin(const DenseMatrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) fail(ErrorCode::kShapeMismatch, "qr_thin needs rows >= cols, got " + shape_str(a));

  DenseMatrix r = a;
  std::vector<std::vector<double>> reflectors(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> v(m - k);
    for (std::size_t i = k; i < m; ++i) v[i - k] = r(i, k);
    const double alpha = norm2(v);
    if (alpha == 0.0) continue;  // zero column, identity reflector
    v[0] += v[0] >= 0.0 ? alpha : -alpha;
    const double vnorm = norm2(v);
    for (double& x : v) x /= vnorm;
    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i - k] * r(i, j);
      for (std::size_t i = k; i < m; ++i) r(i, j) -= 2.0 * v[i - k] * s;
    }
    reflectors[k] = std::move(v);
  }

  // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I.
  DenseMatrix q = DenseMatrix::rectangular_identity(m, n);
  for (std::size_t kk = n; kk-- > 0;) {
    const auto& v = reflectors[kk];
    if (v.empty()) continue;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = kk; i < m; ++i) s += v[i - kk] * q(i, j);
      for (std::size_t i = kk; i < m; ++i) q(i, j) -= 2.0 * v[i - kk] * s;
    }
  }

  DenseMatrix rr(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) rr(i, j) = r(i, j);
  return {std::move(q), std::move(rr)};
}

namespace {

// Replaces zero columns of `u` (rows x k) with unit vectors orthogonal to all
// other columns so that U stays orthonormal when singular values vanish.
void complete_orthonormal(DenseMatrix& u, const std::vector<bool>& is_zero) {
  const std::size_t m = u.rows();
  std::size_t probe = 0;
  for (std::size_t c = 0; c < u.cols(); ++c) {
    if (!is_zero[c]) continue;
    for (; probe < m; ++probe) {
      std::vector<double> cand(m, 0.0);
      cand[probe] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t o = 0; o < u.cols(); ++o) {
          if (o == c) continue;
          double s = 0.0;
          for (std::size_t i = 0; i < m; ++i) s += u(i, o) * cand[i];
          for (std::size_t i = 0; i < m; ++i) cand[i] -= s * u(i, o);
        }
      }
      const double nrm = norm2(cand);
      if (nrm > 1e-6) {
        for (std::size_t i = 0; i < m; ++i) u(i, c) = cand[i] / nrm;
        ++probe;
        break;
      }
    }
  }
}

}  // namespace

SvdResult jacobi_svd(const DenseMatrix& a) {
  if (a.rows() < a.cols()) {
    SvdResult t = jacobi_svd(a.transposed());
    return {std::move(t.v), std::move(t.s), std::move(t.u)};
  }
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  // Rows of g are the columns of a; rows of vt are the columns of V.
  DenseMatrix g = a.transposed();
  DenseMatrix vt = DenseMatrix::identity(n);

  constexpr double kEps = 1e-15;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto gp = g.row(p);
        auto gq = g.row(q);
        const double alpha = dot(gp, gp);
        const double beta = dot(gq, gq);
        const double gamma = dot(gp, gq);
        if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = gp[i];
          const double y = gq[i];
          gp[i] = c * x - s * y;
          gq[i] = s * x + c * y;
        }
        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i];
          const double y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t i = 0; i < n; ++i) sigma[i] = norm2(g.row(i));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  const double smax = n == 0 ? 0.0 : sigma[order[0]];
  SvdResult out{DenseMatrix(m, n), std::vector<double>(n), DenseMatrix(n, n)};
  std::vector<bool> zero(n, false);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    out.s[c] = sigma[src];
    if (sigma[src] <= smax * 1e-14 || sigma[src] == 0.0) {
      zero[c] = true;
      out.s[c] = 0.0;
    } else {
      for (std::size_t i = 0; i < m; ++i) out.u(i, c) = g(src, i) / sigma[src];
    }
    for (std::size_t i = 0; i < n; ++i) out.v(i, c) = vt(src, i);
  }
  complete_orthonormal(out.u, zero);
  return out;
}

SvdResult truncated_svd(const DenseMatrix& m, std::size_t k, std::uint64_t seed) {
  const std::size_t rank_bound = std::min(m.rows(), m.cols());
  if (k < 1 || k > rank_bound) {
    fail(ErrorCode::kRankTooLarge, "k=" + std::to_string(k) + " for a " + shape_str(m) +
                                       " matrix (bound " + std::to_string(rank_bound) + ")");
  }
  constexpr std::size_t kOversampling = 10;
  constexpr int kPowerIterations = 2;
  const std::size_t l = std::min(k + kOversampling, rank_bound);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  DenseMatrix omega(m.cols(), l);
  for (double& x : omega.data()) x = gauss(rng);

  DenseMatrix q = qr_thin(multiply(m, omega)).q;
  for (int it = 0; it < kPowerIterations; ++it) {
    DenseMatrix z = qr_thin(multiply_atb(m, q)).q;
    q = qr_thin(multiply(m, z)).q;
  }

  // B = Q^T M is l x cols; factor B^T (cols x l, cols >= l) = W S Z^T so that
  // M ~= (Q Z) S W^T.
  const DenseMatrix bt = multiply_atb(m, q);
  SvdResult small = jacobi_svd(bt);
  const DenseMatrix u_full = multiply(q, small.v);

  SvdResult out{DenseMatrix(m.rows(), k), std::vector<double>(small.s.begin(), small.s.begin() + k),
                DenseMatrix(m.cols(), k)};
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < m.cols(); ++i) {
      if (std::abs(small.u(i, c)) > std::abs(small.u(arg, c))) arg = i;
    }
    const double sign = small.u(arg, c) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < m.rows(); ++i) out.u(i, c) = sign * u_full(i, c);
    for (std::size_t i = 0; i < m.cols(); ++i) out.v(i, c) = sign * small.u(i, c);
  }
  return out;
}

DenseMatrix ridge_solve(const DenseMatrix& x, const DenseMatrix& y, double lambda) {
  if (x.rows() == 0) fail(ErrorCode::kInvalidArgument, "ridge_solve needs at least one row");
  if (x.rows() != y.rows()) {
    fail(ErrorCode::kShapeMismatch, "X " + shape_str(x) + " vs Y " + shape_str(y));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    fail(ErrorCode::kInvalidArgument, "lambda must be finite and non-negative");
  }
  const std::size_t p = x.cols();
  const std::size_t q = y.cols();
  DenseMatrix gram = multiply_atb(x, x);
  for (std::size_t i = 0; i < p; ++i) gram(i, i) += lambda;
  const DenseMatrix rhs = multiply_atb(x, y);  // p x q

  double max_diag = 0.0;
  for (std::size_t i = 0; i < p; ++i) max_diag = std::max(max_diag, gram(i, i));
  const double tol = 1e-12 * std::max(1.0, static_cast<double>(p)) * max_diag;

  // In-place lower Cholesky factor.
  DenseMatrix l(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    double d = gram(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol)) {
      fail(ErrorCode::kSingularSystem,
           "normal equations are not positive definite at pivot " + std::to_string(j));
    }
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = gram(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }

  DenseMatrix a(q, p);
  std::vector<double> z(p);
  for (std::size_t c = 0; c < q; ++c) {
    for (std::size_t i = 0; i < p; ++i) {
      double s = rhs(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * z[k];
      z[i] = s / l(i, i);
    }
    for (std::size_t i = p; i-- > 0;) {
      double s = z[i];
      for (std::size_t k = i + 1; k < p; ++k) s -= l(k, i) * a(c, k);
      a(c, i) = s / l(i, i);
    }
  }
  return a;
}

}  // namespace metasense
