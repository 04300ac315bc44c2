#pragma once

// Shared fixtures for the test suites: a calibrated two-view rigid scene with
// a closed-form fundamental matrix, and small linear-algebra oracles kept
// deliberately independent of the library's solver paths.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "laav/geometry.hpp"
#include "laav/numerics.hpp"
#include "laav/rng.hpp"

namespace testing {

// Dense Gaussian elimination with partial pivoting; the normal-equations
// oracle for least-squares checks.
inline std::vector<double> gaussian_solve(laav::Matrix a, std::vector<double> b) {
  const std::size_t n = a.rows();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(b[k], b[piv]);
    }
    if (std::abs(a(k, k)) < 1e-14) throw std::runtime_error("oracle: singular");
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= a(k, j) * x[j];
    x[k] = s / a(k, k);
  }
  return x;
}

inline std::vector<double> normal_equations_solve(const laav::Matrix& a,
                                                  const std::vector<double>& b) {
  const laav::Matrix at = a.transposed();
  return gaussian_solve(at * a, at * b);
}

// Calibrated stereo pair: left camera at the origin, right camera rotated and
// translated.  F = K^-T [t]x R K^-1, so projected correspondences satisfy the
// epipolar constraint exactly.
struct TwoViewScene {
  std::vector<laav::Point2> left;
  std::vector<laav::Point2> right;
  laav::Mat3 f_true;  // unit Frobenius norm
};

inline laav::Mat3 rotation_xyz(double ax, double ay, double az) {
  const double cx = std::cos(ax), sx = std::sin(ax);
  const double cy = std::cos(ay), sy = std::sin(ay);
  const double cz = std::cos(az), sz = std::sin(az);
  laav::Mat3 rx = laav::Mat3::identity();
  rx.m[1][1] = cx; rx.m[1][2] = -sx; rx.m[2][1] = sx; rx.m[2][2] = cx;
  laav::Mat3 ry = laav::Mat3::identity();
  ry.m[0][0] = cy; ry.m[0][2] = sy; ry.m[2][0] = -sy; ry.m[2][2] = cy;
  laav::Mat3 rz = laav::Mat3::identity();
  rz.m[0][0] = cz; rz.m[0][1] = -sz; rz.m[1][0] = sz; rz.m[1][1] = cz;
  return rz * ry * rx;
}

inline TwoViewScene make_two_view_scene(std::uint64_t seed, int n_points,
                                        double rot = 0.08,
                                        laav::Vec3 t = {0.4, 0.05, 0.02}) {
  laav::Rng rng(seed);
  const double fx = 800.0, fy = 800.0, cx = 320.0, cy = 240.0;
  const laav::Mat3 r = rotation_xyz(rot, -rot * 0.6, rot * 0.3);

  laav::Mat3 k;
  k.m[0][0] = fx; k.m[0][2] = cx;
  k.m[1][1] = fy; k.m[1][2] = cy;
  k.m[2][2] = 1.0;
  laav::Mat3 k_inv;
  k_inv.m[0][0] = 1.0 / fx; k_inv.m[0][2] = -cx / fx;
  k_inv.m[1][1] = 1.0 / fy; k_inv.m[1][2] = -cy / fy;
  k_inv.m[2][2] = 1.0;

  laav::Mat3 tx;  // [t]x
  tx.m[0][1] = -t[2]; tx.m[0][2] = t[1];
  tx.m[1][0] = t[2];  tx.m[1][2] = -t[0];
  tx.m[2][0] = -t[1]; tx.m[2][1] = t[0];

  TwoViewScene scene;
  scene.f_true = k_inv.transposed() * (tx * r) * k_inv;
  scene.f_true = scene.f_true.scaled(1.0 / scene.f_true.frobenius_norm());

  while (static_cast<int>(scene.left.size()) < n_points) {
    const laav::Vec3 p3d = {rng.uniform(-1.5, 1.5), rng.uniform(-1.2, 1.2),
                            rng.uniform(3.0, 8.0)};
    const laav::Vec3 q = r * p3d;
    const laav::Vec3 p2 = {q[0] + t[0], q[1] + t[1], q[2] + t[2]};
    if (p2[2] < 0.5) continue;
    const laav::Vec3 img1 = k * p3d;
    const laav::Vec3 img2 = k * p2;
    scene.left.push_back({img1[0] / img1[2], img1[1] / img1[2]});
    scene.right.push_back({img2[0] / img2[2], img2[1] / img2[2]});
  }
  return scene;
}

}  // namespace testing
