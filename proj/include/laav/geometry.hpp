#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "laav/errors.hpp"
#include "laav/numerics.hpp"

namespace laav {

// 2D feature point in pixels; lifts to homogeneous coordinates with w = 1.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec3 hom(const Point2& p) { return {p.x, p.y, 1.0}; }

inline double distance(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

// ---------------------------------------------------------------------------
// Affine transforms
// ---------------------------------------------------------------------------

// 2x3 affine map between a frame pair: linear part plus translation.
// The linear part is non-singular by construction.
struct AffineTransform {
  double a[2][3] = {{1, 0, 0}, {0, 1, 0}};
  int source_frame = 0;
  int target_frame = 1;

  double linear_det() const { return a[0][0] * a[1][1] - a[0][1] * a[1][0]; }

  AffineTransform inverted() const {
    const double det = linear_det();
    AffineTransform inv;
    inv.source_frame = target_frame;
    inv.target_frame = source_frame;
    inv.a[0][0] = a[1][1] / det;
    inv.a[0][1] = -a[0][1] / det;
    inv.a[1][0] = -a[1][0] / det;
    inv.a[1][1] = a[0][0] / det;
    inv.a[0][2] = -(inv.a[0][0] * a[0][2] + inv.a[0][1] * a[1][2]);
    inv.a[1][2] = -(inv.a[1][0] * a[0][2] + inv.a[1][1] * a[1][2]);
    return inv;
  }
};

inline Point2 apply_affine(const AffineTransform& t, const Point2& p) {
  return {t.a[0][0] * p.x + t.a[0][1] * p.y + t.a[0][2],
          t.a[1][0] * p.x + t.a[1][1] * p.y + t.a[1][2]};
}

// Least-squares affine from >= 3 correspondences. Exact (residual < 1e-9)
// whenever a true affine relates the two sets. Throws DegenerateConfiguration
// for collinear or coincident source points or a singular fitted linear part.
inline AffineTransform fit_affine(std::span<const Point2> src,
                                  std::span<const Point2> dst,
                                  int source_frame = 0, int target_frame = 1) {
  const std::size_t n = src.size();
  if (n != dst.size() || n < 3)
    throw std::invalid_argument("fit_affine: need >= 3 paired points");
  if (source_frame == target_frame)
    throw std::invalid_argument("fit_affine: frames must differ");

  Matrix design(n, 3);
  std::vector<double> bx(n), by(n);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = src[i].x;
    design(i, 1) = src[i].y;
    design(i, 2) = 1.0;
    bx[i] = dst[i].x;
    by[i] = dst[i].y;
  }

  AffineTransform t;
  t.source_frame = source_frame;
  t.target_frame = target_frame;
  try {
    const auto rx = solve_least_squares(design, bx);
    const auto ry = solve_least_squares(design, by);
    t.a[0][0] = rx.x[0];
    t.a[0][1] = rx.x[1];
    t.a[0][2] = rx.x[2];
    t.a[1][0] = ry.x[0];
    t.a[1][1] = ry.x[1];
    t.a[1][2] = ry.x[2];
  } catch (const DegenerateSystem&) {
    throw DegenerateConfiguration("fit_affine: collinear or coincident points");
  }
  if (std::abs(t.linear_det()) <= 1e-12)
    throw DegenerateConfiguration("fit_affine: singular linear part");
  return t;
}

// Exact 3-point affine, the RANSAC minimal solver. Returns nullopt for
// (near-)collinear samples instead of throwing: degenerate samples are the
// common path inside a consensus loop.
inline std::optional<AffineTransform> fit_affine_minimal(
    const Point2& s0, const Point2& s1, const Point2& s2, const Point2& d0,
    const Point2& d1, const Point2& d2, int source_frame = 0,
    int target_frame = 1) {
  const double ux = s1.x - s0.x, uy = s1.y - s0.y;
  const double vx = s2.x - s0.x, vy = s2.y - s0.y;
  const double det = ux * vy - uy * vx;  // twice the triangle area
  const double scale2 = (ux * ux + uy * uy) + (vx * vx + vy * vy);
  if (std::abs(det) <= 1e-9 * std::max(1.0, scale2)) return std::nullopt;

  auto solve_row = [&](double t0, double t1, double t2) {
    const double du1 = t1 - t0, du2 = t2 - t0;
    const double c0 = (du1 * vy - du2 * uy) / det;
    const double c1 = (du2 * ux - du1 * vx) / det;
    const double c2 = t0 - c0 * s0.x - c1 * s0.y;
    return Vec3{c0, c1, c2};
  };

  AffineTransform t;
  t.source_frame = source_frame;
  t.target_frame = target_frame;
  const Vec3 row0 = solve_row(d0.x, d1.x, d2.x);
  const Vec3 row1 = solve_row(d0.y, d1.y, d2.y);
  t.a[0][0] = row0[0];
  t.a[0][1] = row0[1];
  t.a[0][2] = row0[2];
  t.a[1][0] = row1[0];
  t.a[1][1] = row1[1];
  t.a[1][2] = row1[2];
  if (std::abs(t.linear_det()) <= 1e-12) return std::nullopt;
  return t;
}

// Round trip through one atom's forward transform and another's backward
// transform, averaged over the probe points and symmetrized by taking the
// worse direction. Zero when the two transforms describe the same motion.
inline double forward_backward_error(const AffineTransform& t_ab,
                                     std::span<const Point2> points_src,
                                     std::span<const Point2> points_dst,
                                     const AffineTransform& t_ba) {
  if (points_src.empty() || points_src.size() != points_dst.size())
    throw std::invalid_argument("forward_backward_error: bad point lists");

  double fwd = 0.0;
  for (const Point2& p : points_src)
    fwd += distance(apply_affine(t_ba, apply_affine(t_ab, p)), p);
  fwd /= static_cast<double>(points_src.size());

  double bwd = 0.0;
  for (const Point2& q : points_dst)
    bwd += distance(apply_affine(t_ab, apply_affine(t_ba, q)), q);
  bwd /= static_cast<double>(points_dst.size());

  return std::max(fwd, bwd);
}

// ---------------------------------------------------------------------------
// Epipolar geometry
// ---------------------------------------------------------------------------

struct Svd3 {
  Mat3 u;
  Vec3 sigma;  // descending, non-negative
  Mat3 v;
};

// One-sided Jacobi SVD of a 3x3 matrix: a = u * diag(sigma) * v^T.
inline Svd3 svd3(const Mat3& a_in) {
  Mat3 a = a_in;
  Mat3 v = Mat3::identity();

  for (int sweep = 0; sweep < 60; ++sweep) {
    double max_cos = 0.0;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < 3; ++i) {
          app += a.m[i][p] * a.m[i][p];
          aqq += a.m[i][q] * a.m[i][q];
          apq += a.m[i][p] * a.m[i][q];
        }
        if (app * aqq > 0.0)
          max_cos = std::max(max_cos, std::abs(apq) / std::sqrt(app * aqq));
        if (std::abs(apq) <= 1e-300) continue;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0)
                             ? 1.0 / (zeta + std::sqrt(1.0 + zeta * zeta))
                             : -1.0 / (-zeta + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < 3; ++i) {
          const double aip = a.m[i][p];
          const double aiq = a.m[i][q];
          a.m[i][p] = c * aip - s * aiq;
          a.m[i][q] = s * aip + c * aiq;
          const double vip = v.m[i][p];
          const double viq = v.m[i][q];
          v.m[i][p] = c * vip - s * viq;
          v.m[i][q] = s * vip + c * viq;
        }
      }
    }
    if (max_cos < 1e-15) break;
  }

  Svd3 out;
  out.v = v;
  int order[3] = {0, 1, 2};
  double norms[3];
  for (int j = 0; j < 3; ++j) {
    norms[j] = std::sqrt(a.m[0][j] * a.m[0][j] + a.m[1][j] * a.m[1][j] +
                         a.m[2][j] * a.m[2][j]);
  }
  std::sort(order, order + 3, [&](int l, int r) { return norms[l] > norms[r]; });
  for (int j = 0; j < 3; ++j) {
    const int src = order[j];
    out.sigma[j] = norms[src];
    for (int i = 0; i < 3; ++i) {
      out.u.m[i][j] = (norms[src] > 0.0) ? a.m[i][src] / norms[src] : 0.0;
      out.v.m[i][j] = v.m[i][src];
    }
  }
  // Complete u's last column if the smallest singular value vanished.
  if (out.sigma[2] <= 1e-300 * std::max(1.0, out.sigma[0])) {
    out.u.m[0][2] = out.u.m[1][0] * out.u.m[2][1] - out.u.m[2][0] * out.u.m[1][1];
    out.u.m[1][2] = out.u.m[2][0] * out.u.m[0][1] - out.u.m[0][0] * out.u.m[2][1];
    out.u.m[2][2] = out.u.m[0][0] * out.u.m[1][1] - out.u.m[1][0] * out.u.m[0][1];
  }
  return out;
}

// Rank-2 fundamental matrix for a frame pair, Frobenius norm fixed to 1.
struct FundamentalMatrix {
  Mat3 f;
  int frame_l = 0;
  int frame_r = 1;
};

namespace detail {

struct NormalizingTransform {
  double scale = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 matrix() const {
    Mat3 t;
    t.m[0][0] = scale;
    t.m[0][2] = -scale * cx;
    t.m[1][1] = scale;
    t.m[1][2] = -scale * cy;
    t.m[2][2] = 1.0;
    return t;
  }
};

// Hartley conditioning: centroid to the origin, RMS radius sqrt(2).
inline NormalizingTransform hartley_normalization(std::span<const Point2> pts) {
  NormalizingTransform t;
  for (const Point2& p : pts) {
    t.cx += p.x;
    t.cy += p.y;
  }
  t.cx /= static_cast<double>(pts.size());
  t.cy /= static_cast<double>(pts.size());
  double rms2 = 0.0;
  for (const Point2& p : pts) {
    const double dx = p.x - t.cx;
    const double dy = p.y - t.cy;
    rms2 += dx * dx + dy * dy;
  }
  rms2 /= static_cast<double>(pts.size());
  if (rms2 <= 1e-18)
    throw DegenerateConfiguration("eight-point: coincident points");
  t.scale = std::sqrt(2.0 / rms2);
  return t;
}

}  // namespace detail

// Normalized eight-point estimate of F between two frames, rank 2 enforced by
// zeroing the smallest singular value. Purely planar point sets leave a null
// space of dimension > 1; any null vector then satisfies every correspondence
// exactly, so the smallest-eigenvector solution is still returned. Only
// configurations whose solution collapses below rank 2 are rejected.
inline FundamentalMatrix estimate_fundamental(std::span<const Point2> pts_l,
                                              std::span<const Point2> pts_r,
                                              int frame_l = 0, int frame_r = 1) {
  const std::size_t n = pts_l.size();
  if (n != pts_r.size())
    throw std::invalid_argument("eight-point: point counts differ");
  if (n < 8) throw std::invalid_argument("eight-point: need >= 8 correspondences");

  const auto tl = detail::hartley_normalization(pts_l);
  const auto tr = detail::hartley_normalization(pts_r);

  // Normal matrix of the stacked epipolar constraints, 9x9.
  SymmetricMatrix ata(9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = tl.scale * (pts_l[i].x - tl.cx);
    const double y = tl.scale * (pts_l[i].y - tl.cy);
    const double xp = tr.scale * (pts_r[i].x - tr.cx);
    const double yp = tr.scale * (pts_r[i].y - tr.cy);
    const double row[9] = {xp * x, xp * y, xp, yp * x, yp * y, yp, x, y, 1.0};
    for (int a = 0; a < 9; ++a)
      for (int b = a; b < 9; ++b) ata.add(a, b, row[a] * row[b]);
  }

  const EigenDecomposition eig = eigen_symmetric(ata);
  Mat3 fn;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) fn.m[i][j] = eig.eigenvectors(3 * i + j, 8);

  // Rank-2 enforcement by singular value truncation.
  const Svd3 svd = svd3(fn);
  if (svd.sigma[1] <= 1e-12 * std::max(svd.sigma[0], 1e-300))
    throw DegenerateConfiguration("eight-point: solution collapses below rank 2");
  Mat3 f2;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      f2.m[i][j] = svd.sigma[0] * svd.u.m[i][0] * svd.v.m[j][0] +
                   svd.sigma[1] * svd.u.m[i][1] * svd.v.m[j][1];

  // Undo the conditioning: F = Tr^T * F2 * Tl.
  Mat3 f = tr.matrix().transposed() * f2 * tl.matrix();

  // Fix scale and sign so equal inputs give bit-equal results.
  const double norm = f.frobenius_norm();
  if (!(norm > 0.0))
    throw DegenerateConfiguration("eight-point: zero solution");
  f = f.scaled(1.0 / norm);
  double largest = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (std::abs(f.m[i][j]) > std::abs(largest)) largest = f.m[i][j];
  if (largest < 0.0) f = f.scaled(-1.0);

  return FundamentalMatrix{f, frame_l, frame_r};
}

// Epipolar line in the second image induced by a point in the first.
inline Vec3 epipolar_line(const Mat3& f, const Point2& y1) { return f * hom(y1); }

// First-order (Sampson) distance of a correspondence to exact epipolar
// consistency:
//   (y2^T F y1)^2 / ((F y1)_1^2 + (F y1)_2^2 + (F^T y2)_1^2 + (F^T y2)_2^2).
// nullopt when both line gradients vanish (the point sits at an epipole);
// callers skip such features.
inline std::optional<double> sampson_distance(const Mat3& f, const Point2& y1,
                                              const Point2& y2) {
  const Vec3 fy1 = f * hom(y1);
  const Vec3 fty2 = f.transposed() * hom(y2);
  const double den =
      fy1[0] * fy1[0] + fy1[1] * fy1[1] + fty2[0] * fty2[0] + fty2[1] * fty2[1];
  if (den < 1e-30) return std::nullopt;
  const double num = dot(hom(y2), fy1);
  return num * num / den;
}

inline std::optional<double> sampson_distance(const FundamentalMatrix& f,
                                              const Point2& y1, const Point2& y2) {
  return sampson_distance(f.f, y1, y2);
}

// sigma_3 / sigma_2 of the stored matrix; < 1e-10 for every estimate returned
// by estimate_fundamental.
inline double rank2_defect_ratio(const FundamentalMatrix& f) {
  const Svd3 svd = svd3(f.f);
  return (svd.sigma[1] > 0.0) ? svd.sigma[2] / svd.sigma[1]
                              : std::numeric_limits<double>::infinity();
}

}  // namespace laav
