#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "laav/geometry.hpp"
#include "laav/numerics.hpp"
#include "laav/rng.hpp"
#include "laav/trajectory.hpp"

namespace laav {

// A set of >= 3 neighboring features that share one affine transform between a
// frame pair. The unit of voting for everything downstream.
struct Atom {
  int id = -1;
  std::vector<int> feature_ids;  // sorted ascending
  int origin_feature = -1;
  int frame_l = 0;
  int frame_r = 1;
  AffineTransform transform;              // maps frame_l positions to frame_r
  std::vector<Point2> centroid_per_frame;  // length L
};

struct AtomConstructionConfig {
  double r1 = 20.0;  // inner exclusion radius, pixels
  double r2 = 40.0;  // outer bounding radius, pixels
  int min_frame_separation = 2;
  RansacConfig ransac;
  int max_passes = 3;
  std::uint64_t seed = 0;

  // min_frame_separation scaled to the sequence: L/3, floored at 2, capped to
  // keep at least one admissible frame pair.
  static AtomConstructionConfig defaults_for(const TrajectorySet& traj) {
    AtomConstructionConfig cfg;
    cfg.min_frame_separation =
        std::min(std::max(2, traj.frame_count / 3), traj.frame_count - 1);
    return cfg;
  }

  void validate() const {
    if (!(r1 > 0.0) || r1 > r2) throw std::invalid_argument("atoms: need 0 < r1 <= r2");
    if (min_frame_separation < 1)
      throw std::invalid_argument("atoms: min_frame_separation >= 1");
    if (max_passes < 1) throw std::invalid_argument("atoms: max_passes >= 1");
  }
};

struct AtomBuildResult {
  std::vector<Atom> atoms;
  std::vector<int> unassigned;  // features joined to no atom, ascending
};

// Robust per-coordinate noise scale from trajectory second differences.
// Smooth motion contributes little curvature, so the median absolute second
// difference is dominated by tracking noise.
inline double estimate_noise_sigma(const TrajectorySet& traj) {
  if (traj.frame_count < 3) return 0.0;
  std::vector<double> mags;
  mags.reserve(static_cast<std::size_t>(traj.feature_count) *
               (traj.frame_count - 2) * 2);
  for (int k = 0; k < traj.feature_count; ++k) {
    for (int t = 1; t + 1 < traj.frame_count; ++t) {
      const Point2 a = traj.at(k, t - 1);
      const Point2 b = traj.at(k, t);
      const Point2 c = traj.at(k, t + 1);
      mags.push_back(std::abs(c.x - 2.0 * b.x + a.x));
      mags.push_back(std::abs(c.y - 2.0 * b.y + a.y));
    }
  }
  if (mags.empty()) return 0.0;
  const std::size_t mid = mags.size() / 2;
  std::nth_element(mags.begin(), mags.begin() + mid, mags.end());
  // |d2| of Gaussian noise has median 0.6745 * sqrt(6) * sigma.
  return mags[mid] / (0.6745 * std::sqrt(6.0));
}

// Sequential atom construction. Per pass: shuffle the not-yet-joined features,
// and for each seed draw a frame pair, gather the R2 disc around the seed, run
// an affine consensus test, and lock everything within R1 of the origin
// against future joins. Deterministic for a given (traj, cfg, seed).
inline AtomBuildResult build_atoms(const TrajectorySet& traj,
                                   const AtomConstructionConfig& cfg) {
  cfg.validate();
  const int k_count = traj.feature_count;
  const int l_count = traj.frame_count;

  AtomBuildResult out;
  if (k_count < 3 || l_count < 2) {
    for (int k = 0; k < k_count; ++k) out.unassigned.push_back(k);
    return out;
  }

  Rng rng(cfg.seed);
  const int sep = std::min(cfg.min_frame_separation, l_count - 1);
  const double threshold =
      std::max(cfg.ransac.inlier_threshold,
               3.0 * std::sqrt(2.0) * estimate_noise_sigma(traj));

  std::vector<char> joined(k_count, 0);
  std::vector<char> locked(k_count, 0);

  for (int pass = 0; pass < cfg.max_passes; ++pass) {
    std::vector<int> seeds;
    for (int k = 0; k < k_count; ++k)
      if (!joined[k]) seeds.push_back(k);
    if (seeds.empty()) break;
    rng.shuffle(seeds);

    for (int seed_feature : seeds) {
      if (joined[seed_feature] || locked[seed_feature]) continue;

      const int l = rng.uniform_int(0, l_count - 1 - sep);
      const int r = rng.uniform_int(l + sep, l_count - 1);
      const Point2 origin = traj.at(seed_feature, l);

      std::vector<int> candidates;
      for (int k = 0; k < k_count; ++k) {
        if (locked[k]) continue;
        if (distance(traj.at(k, l), origin) <= cfg.r2) candidates.push_back(k);
      }
      if (static_cast<int>(candidates.size()) < 3) continue;

      std::vector<Point2> src(candidates.size()), dst(candidates.size());
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        src[i] = traj.at(candidates[i], l);
        dst[i] = traj.at(candidates[i], r);
      }

      RansacConfig rc = cfg.ransac;
      rc.inlier_threshold = threshold;
      rc.seed = rng.next();
      const auto consensus = ransac<AffineTransform>(
          candidates.size(), 3,
          [&](std::span<const std::size_t> idx) {
            return fit_affine_minimal(src[idx[0]], src[idx[1]], src[idx[2]],
                                      dst[idx[0]], dst[idx[1]], dst[idx[2]], l, r);
          },
          [&](const AffineTransform& t, std::size_t i) {
            return distance(apply_affine(t, src[i]), dst[i]);
          },
          rc);
      if (!consensus) continue;

      // Refit in least squares over the consensus set, then re-derive the
      // member set with the refined transform so members are exactly its
      // inliers.
      std::vector<Point2> in_src, in_dst;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!consensus->inlier_mask[i]) continue;
        in_src.push_back(src[i]);
        in_dst.push_back(dst[i]);
      }
      AffineTransform refined;
      try {
        refined = fit_affine(in_src, in_dst, l, r);
      } catch (const DegenerateConfiguration&) {
        continue;
      }

      std::vector<int> members;
      for (std::size_t i = 0; i < candidates.size(); ++i)
        if (distance(apply_affine(refined, src[i]), dst[i]) <= threshold)
          members.push_back(candidates[i]);
      if (static_cast<int>(members.size()) < 3) continue;
      if (!std::binary_search(members.begin(), members.end(), seed_feature))
        continue;

      Atom atom;
      atom.id = static_cast<int>(out.atoms.size());
      atom.feature_ids = members;
      atom.origin_feature = seed_feature;
      atom.frame_l = l;
      atom.frame_r = r;
      atom.transform = refined;
      atom.centroid_per_frame.assign(l_count, Point2{});
      for (int t = 0; t < l_count; ++t) {
        double sx = 0.0, sy = 0.0;
        for (int f : members) {
          sx += traj.at(f, t).x;
          sy += traj.at(f, t).y;
        }
        atom.centroid_per_frame[t] = {sx / members.size(), sy / members.size()};
      }
      out.atoms.push_back(std::move(atom));

      for (int f : members) joined[f] = 1;
      // R1 exclusion: everything near the origin, member or not, is off
      // limits for later atoms.
      for (int k = 0; k < k_count; ++k)
        if (!locked[k] && distance(traj.at(k, l), origin) <= cfg.r1) locked[k] = 1;
    }
  }

  for (int k = 0; k < k_count; ++k)
    if (!joined[k]) out.unassigned.push_back(k);
  return out;
}

// Edges of the atom graph: every atom is linked to its k nearest atoms by
// centroid distance at the reference frame, plus every pair sharing at least
// one feature. Symmetric, no self loops, no duplicates, sorted.
inline std::vector<std::pair<int, int>> atom_overlap_graph_edges(
    std::span<const Atom> atoms, int k_neighbors) {
  const int n = static_cast<int>(atoms.size());
  std::vector<std::pair<int, int>> edges;
  if (n < 2) return edges;

  auto push = [&edges](int i, int j) {
    if (i == j) return;
    edges.emplace_back(std::min(i, j), std::max(i, j));
  };

  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> dist;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      dist.emplace_back(
          distance(atoms[i].centroid_per_frame[0], atoms[j].centroid_per_frame[0]),
          j);
    }
    const int take = std::min<int>(k_neighbors, static_cast<int>(dist.size()));
    std::partial_sort(dist.begin(), dist.begin() + take, dist.end());
    for (int t = 0; t < take; ++t) push(i, dist[t].second);
  }

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& a = atoms[i].feature_ids;
      const auto& b = atoms[j].feature_ids;
      std::size_t ia = 0, ib = 0;
      bool overlap = false;
      while (ia < a.size() && ib < b.size()) {
        if (a[ia] == b[ib]) {
          overlap = true;
          break;
        }
        (a[ia] < b[ib]) ? ++ia : ++ib;
      }
      if (overlap) push(i, j);
    }
  }

  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

}  // namespace laav
