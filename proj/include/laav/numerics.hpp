#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "laav/errors.hpp"
#include "laav/rng.hpp"

namespace laav {

using Vec3 = std::array<double, 3>;

// ---------------------------------------------------------------------------
// Small dense matrices
// ---------------------------------------------------------------------------

// Row-major dense matrix. Sized for the work here: design matrices with a
// handful of columns and symmetric systems up to a few hundred rows.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix operator*(const Matrix& rhs) const {
    Matrix out(rows_, rhs.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = 0; k < cols_; ++k) {
        const double a = (*this)(i, k);
        if (a == 0.0) continue;
        for (std::size_t j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
      }
    return out;
  }

  std::vector<double> operator*(const std::vector<double>& v) const {
    std::vector<double> out(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out[i] += (*this)(i, j) * v[j];
    return out;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// n x n real symmetric matrix; only the upper triangle is stored, so
// entry(i,j) == entry(j,i) holds exactly by construction.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(std::size_t n) : n_(n), data_(n * (n + 1) / 2, 0.0) {}

  std::size_t size() const { return n_; }

  double operator()(std::size_t i, std::size_t j) const { return data_[index(i, j)]; }

  void set(std::size_t i, std::size_t j, double v) { data_[index(i, j)] = v; }
  void add(std::size_t i, std::size_t j, double v) { data_[index(i, j)] += v; }

  Matrix dense() const {
    Matrix m(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i; j < n_; ++j) m(i, j) = m(j, i) = (*this)(i, j);
    return m;
  }

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * n_ - i * (i - 1) / 2 + (j - i);
  }

  std::size_t n_;
  std::vector<double> data_;
};

// Fixed 3x3, row-major. Holds fundamental matrices and homogeneous affine
// transforms.
struct Mat3 {
  double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

  static Mat3 identity() {
    Mat3 r;
    r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
    return r;
  }

  Vec3 operator*(const Vec3& v) const {
    return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
        r.m[i][j] = s;
      }
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
  }

  Mat3 scaled(double c) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] * c;
    return r;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s += m[i][j] * m[i][j];
    return std::sqrt(s);
  }

  double det() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  }
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

struct LeastSquaresResult {
  std::vector<double> x;
  double residual_norm = 0.0;  // ||Ax - b||_2
};

// Minimizes ||Ax - b||_2 via Householder QR with column pivoting.
// Throws DegenerateSystem when rank(A) < cols (rank tolerance 1e-10 * ||A||_F),
// which upstream callers read as "collinear or coincident input points".
inline LeastSquaresResult solve_least_squares(const Matrix& a_in,
                                              const std::vector<double>& b_in) {
  const std::size_t m = a_in.rows();
  const std::size_t n = a_in.cols();
  if (m < n) throw DegenerateSystem("least squares: fewer rows than unknowns");

  Matrix a = a_in;
  std::vector<double> b = b_in;
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < n; ++j) perm[j] = j;

  const double tol = 1e-10 * a_in.frobenius_norm();

  std::vector<double> col_norm2(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) col_norm2[j] += a(i, j) * a(i, j);

  for (std::size_t k = 0; k < n; ++k) {
    // Pivot: bring the column with the largest remaining norm to position k.
    std::size_t pivot = k;
    double best = -1.0;
    for (std::size_t j = k; j < n; ++j) {
      double nrm = 0.0;
      for (std::size_t i = k; i < m; ++i) nrm += a(i, j) * a(i, j);
      if (nrm > best) {
        best = nrm;
        pivot = j;
      }
    }
    if (pivot != k) {
      for (std::size_t i = 0; i < m; ++i) std::swap(a(i, k), a(i, pivot));
      std::swap(perm[k], perm[pivot]);
    }

    double alpha = std::sqrt(std::max(best, 0.0));
    if (alpha <= tol) throw DegenerateSystem("least squares: rank-deficient system");
    if (a(k, k) > 0.0) alpha = -alpha;

    // Householder vector v, stored in place below the diagonal.
    std::vector<double> v(m - k, 0.0);
    v[0] = a(k, k) - alpha;
    for (std::size_t i = k + 1; i < m; ++i) v[i - k] = a(i, k);
    double vnorm2 = 0.0;
    for (double t : v) vnorm2 += t * t;
    if (vnorm2 > 0.0) {
      for (std::size_t j = k; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += v[i - k] * a(i, j);
        s = 2.0 * s / vnorm2;
        for (std::size_t i = k; i < m; ++i) a(i, j) -= s * v[i - k];
      }
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i - k] * b[i];
      s = 2.0 * s / vnorm2;
      for (std::size_t i = k; i < m; ++i) b[i] -= s * v[i - k];
    }
    a(k, k) = alpha;
  }

  // Back substitution on the upper triangle.
  std::vector<double> y(n, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= a(k, j) * y[j];
    if (std::abs(a(k, k)) <= tol)
      throw DegenerateSystem("least squares: rank-deficient system");
    y[k] = s / a(k, k);
  }

  LeastSquaresResult out;
  out.x.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) out.x[perm[j]] = y[j];

  const std::vector<double> ax = a_in * out.x;
  double r2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = ax[i] - b_in[i];
    r2 += d * d;
  }
  out.residual_norm = std::sqrt(r2);
  return out;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition
// ---------------------------------------------------------------------------

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // orthonormal columns, column i pairs with value i
};

// Cyclic Jacobi sweeps. Sizes here stay small (the affinity matrix is 2C x 2C
// and design normal matrices are 9 x 9), so robustness wins over speed.
// Throws NoConvergence when the sweep budget runs out.
inline EigenDecomposition eigen_symmetric(const SymmetricMatrix& sym,
                                          int max_sweeps = 100) {
  const std::size_t n = sym.size();
  Matrix a = sym.dense();
  Matrix v = Matrix::identity(n);

  const double scale = std::max(1.0, a.frobenius_norm());

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };

  int sweep = 0;
  while (off_norm() > 1e-14 * scale) {
    if (++sweep > max_sweeps) throw NoConvergence("jacobi: sweep budget exceeded");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                      : -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        const double app = a(p, p);
        const double aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(p, i) = a(i, p);
          a(i, q) = s * aip + c * aiq;
          a(q, i) = a(i, q);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t l, std::size_t r) { return a(l, l) > a(r, r); });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = v(i, order[j]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;
  double inertia = 0.0;
  int iterations = 0;
};

// Lloyd iterations with seeded initialization. Empty clusters are repaired by
// reseeding them with the point farthest from its current center, so every
// cluster is non-empty on return. Deterministic given the seed.
inline KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed,
                           int max_iter = 100) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("kmeans: need n >= k >= 1");

  Rng rng(seed);
  Matrix centers(static_cast<std::size_t>(k), d);
  {
    auto start = rng.sample_distinct(n, static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c)
      for (std::size_t j = 0; j < d; ++j) centers(c, j) = points(start[c], j);
  }

  auto dist2 = [&](std::size_t i, int c) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double t = points(i, j) - centers(c, j);
      s += t * t;
    }
    return s;
  };

  KMeansResult res;
  res.labels.assign(n, 0);
  std::vector<int> counts(static_cast<std::size_t>(k), 0);

  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = dist2(i, 0);
      for (int c = 1; c < k; ++c) {
        const double dd = dist2(i, c);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (res.labels[i] != best) {
        res.labels[i] = best;
        changed = true;
      }
      inertia += best_d;
    }
    res.inertia = inertia;
    res.iterations = iter + 1;

    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[res.labels[i]];

    // Reseed any empty cluster with the globally farthest point.
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far_i = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[res.labels[i]] <= 1) continue;
        const double dd = dist2(i, res.labels[i]);
        if (dd > far_d) {
          far_d = dd;
          far_i = i;
        }
      }
      --counts[res.labels[far_i]];
      res.labels[far_i] = c;
      counts[c] = 1;
      changed = true;
    }

    Matrix next(static_cast<std::size_t>(k), d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) next(res.labels[i], j) += points(i, j);
    for (int c = 0; c < k; ++c)
      for (std::size_t j = 0; j < d; ++j) next(c, j) /= counts[c];
    centers = next;

    if (!changed && iter > 0) break;
  }

  res.centers = centers;
  return res;
}

// ---------------------------------------------------------------------------
// RANSAC
// ---------------------------------------------------------------------------

struct RansacConfig {
  int max_iterations = 500;
  double inlier_threshold = 1.0;  // pixels
  double min_inlier_ratio = 0.8;
  std::uint64_t seed = 0;
};

template <class Model>
struct RansacResult {
  Model model;
  std::vector<char> inlier_mask;
  int inlier_count = 0;
};

// Generic consensus driver. `fit_minimal` maps a set of sample indices to a
// model (or nullopt for a degenerate sample); `residual` scores one datum.
// Returns nullopt when the best inlier ratio stays below cfg.min_inlier_ratio,
// which callers read as "no consensus". The hypothesis sequence is a pure
// function of cfg.seed, so results are bit-reproducible.
template <class Model, class FitMinimal, class Residual>
std::optional<RansacResult<Model>> ransac(std::size_t data_count,
                                          std::size_t minimal_sample_size,
                                          FitMinimal fit_minimal, Residual residual,
                                          const RansacConfig& cfg) {
  if (data_count < minimal_sample_size) return std::nullopt;
  if (cfg.max_iterations < 1 || cfg.inlier_threshold <= 0.0 ||
      cfg.min_inlier_ratio <= 0.0 || cfg.min_inlier_ratio > 1.0)
    throw std::invalid_argument("ransac: bad config");

  Rng rng(cfg.seed);
  std::optional<Model> best_model;
  int best_count = 0;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    const auto sample = rng.sample_distinct(data_count, minimal_sample_size);
    std::optional<Model> model = fit_minimal(std::span<const std::size_t>(sample));
    if (!model) continue;

    int count = 0;
    for (std::size_t i = 0; i < data_count; ++i)
      if (residual(*model, i) <= cfg.inlier_threshold) ++count;

    if (count > best_count) {
      best_count = count;
      best_model = std::move(model);
      if (best_count == static_cast<int>(data_count)) break;
    }
  }

  if (!best_model) return std::nullopt;
  if (static_cast<double>(best_count) <
      cfg.min_inlier_ratio * static_cast<double>(data_count))
    return std::nullopt;

  RansacResult<Model> out;
  out.model = *best_model;
  out.inlier_mask.assign(data_count, 0);
  out.inlier_count = 0;
  for (std::size_t i = 0; i < data_count; ++i) {
    if (residual(out.model, i) <= cfg.inlier_threshold) {
      out.inlier_mask[i] = 1;
      ++out.inlier_count;
    }
  }
  return out;
}

}  // namespace laav
