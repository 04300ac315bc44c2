#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "laav/atoms.hpp"
#include "laav/errors.hpp"
#include "laav/geometry.hpp"
#include "laav/numerics.hpp"
#include "laav/rng.hpp"
#include "laav/trajectory.hpp"

namespace laav {

// One fine motion model: a group of atoms plus the union of their features
// and the average of their centroid trajectories.
struct MotionModel {
  int id = -1;
  std::vector<int> atom_ids;
  std::vector<int> feature_ids;            // union, sorted
  std::vector<Point2> mean_trajectory;     // length L
};

struct VotingParams {
  double lambda_vote = 2.0;      // voting strength for per-feature scores
  double lambda_affinity = 0.5;  // forgetting factor of the superposition
  int rounds = 30;               // random 4-atom draws per model pair
  int frames_used = 7;           // frames sampled per round
  std::uint64_t seed = 0;

  void validate() const {
    if (lambda_vote <= 0.0 || lambda_affinity <= 0.0)
      throw std::invalid_argument("voting: lambdas must be positive");
    if (rounds < 1 || frames_used < 2)
      throw std::invalid_argument("voting: rounds >= 1, frames_used >= 2");
  }
};

inline std::vector<MotionModel> assemble_motion_models(
    std::span<const Atom> atoms, const std::vector<int>& fine_labels,
    int model_count, int frame_count) {
  std::vector<MotionModel> models(model_count);
  for (int m = 0; m < model_count; ++m) {
    models[m].id = m;
    models[m].mean_trajectory.assign(frame_count, Point2{});
  }
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    MotionModel& model = models[fine_labels[a]];
    model.atom_ids.push_back(static_cast<int>(a));
    model.feature_ids.insert(model.feature_ids.end(), atoms[a].feature_ids.begin(),
                             atoms[a].feature_ids.end());
    for (int t = 0; t < frame_count; ++t) {
      model.mean_trajectory[t].x += atoms[a].centroid_per_frame[t].x;
      model.mean_trajectory[t].y += atoms[a].centroid_per_frame[t].y;
    }
  }
  for (MotionModel& model : models) {
    if (model.atom_ids.empty())
      throw std::invalid_argument("motion models: empty model");
    for (Point2& p : model.mean_trajectory) {
      p.x /= model.atom_ids.size();
      p.y /= model.atom_ids.size();
    }
    std::sort(model.feature_ids.begin(), model.feature_ids.end());
    model.feature_ids.erase(
        std::unique(model.feature_ids.begin(), model.feature_ids.end()),
        model.feature_ids.end());
  }
  return models;
}

// Per-frame RMS of the atoms' centroid displacements, the motion-distance
// normalizer. Floored at 0.1 px. Index 0 is unused.
inline std::vector<double> motion_sigma(std::span<const Atom> atoms,
                                        int frame_count) {
  std::vector<double> sigma(frame_count, 0.1);
  for (int t = 1; t < frame_count; ++t) {
    double s2 = 0.0;
    for (const Atom& a : atoms) {
      const double dx = a.centroid_per_frame[t].x - a.centroid_per_frame[t - 1].x;
      const double dy = a.centroid_per_frame[t].y - a.centroid_per_frame[t - 1].y;
      s2 += dx * dx + dy * dy;
    }
    if (!atoms.empty())
      sigma[t] = std::max(0.1, std::sqrt(s2 / static_cast<double>(atoms.size())));
  }
  return sigma;
}

// || dA/dt - dB/dt || / sigma_t with the partial derivatives taken on the
// averaged trajectories.
inline double motion_distance(const MotionModel& a, const MotionModel& b, int t,
                              double sigma_t) {
  const double dax = a.mean_trajectory[t].x - a.mean_trajectory[t - 1].x;
  const double day = a.mean_trajectory[t].y - a.mean_trajectory[t - 1].y;
  const double dbx = b.mean_trajectory[t].x - b.mean_trajectory[t - 1].x;
  const double dby = b.mean_trajectory[t].y - b.mean_trajectory[t - 1].y;
  return std::hypot(dax - dbx, day - dby) / std::max(sigma_t, 0.1);
}

// Epipolar distance between two motion models for one frame pair: two atoms
// are drawn from each model, F comes from the pooled correspondences of the
// four atoms, and each model is scored by the mean Sampson distance of its
// features under that F. The returned value is the worse of the two sides,
// so it is symmetric in (j, k).
// Throws DegenerateConfiguration when the pooled set cannot produce an F or
// no feature survives scoring; callers skip such rounds.
inline double epipolar_pair_distance(const MotionModel& model_j,
                                     const MotionModel& model_k,
                                     std::span<const Atom> atoms,
                                     const TrajectorySet& traj, int frame_l,
                                     int frame_r, Rng& rng) {
  const MotionModel& lo = (model_j.id <= model_k.id) ? model_j : model_k;
  const MotionModel& hi = (model_j.id <= model_k.id) ? model_k : model_j;

  // First atom uniform, second biased toward distant centroids (squared
  // distance weighting). A spread-out pool keeps the estimated F an
  // interpolant over the model's extent instead of an extrapolation.
  auto sample_atoms = [&](const MotionModel& m) {
    std::vector<int> picked;
    if (m.atom_ids.size() <= 2) {
      picked = m.atom_ids;
      return picked;
    }
    const int first = m.atom_ids[rng.uniform_index(m.atom_ids.size())];
    const Point2 anchor = atoms[first].centroid_per_frame[frame_l];
    double total = 0.0;
    std::vector<double> w(m.atom_ids.size(), 0.0);
    for (std::size_t i = 0; i < m.atom_ids.size(); ++i) {
      if (m.atom_ids[i] == first) continue;
      const double d = distance(atoms[m.atom_ids[i]].centroid_per_frame[frame_l], anchor);
      w[i] = d * d + 1e-9;
      total += w[i];
    }
    double ticket = rng.uniform() * total;
    int second = -1;
    for (std::size_t i = 0; i < m.atom_ids.size(); ++i) {
      if (w[i] == 0.0) continue;
      second = m.atom_ids[i];
      ticket -= w[i];
      if (ticket <= 0.0) break;
    }
    picked = {first, second};
    return picked;
  };
  const std::vector<int> pick_lo = sample_atoms(lo);
  const std::vector<int> pick_hi = sample_atoms(hi);

  auto features_of = [&](const std::vector<int>& atom_ids) {
    std::vector<int> feats;
    for (int a : atom_ids)
      feats.insert(feats.end(), atoms[a].feature_ids.begin(),
                   atoms[a].feature_ids.end());
    std::sort(feats.begin(), feats.end());
    feats.erase(std::unique(feats.begin(), feats.end()), feats.end());
    return feats;
  };

  std::vector<int> pooled = features_of(pick_lo);
  const std::vector<int> pooled_hi = features_of(pick_hi);
  pooled.insert(pooled.end(), pooled_hi.begin(), pooled_hi.end());
  std::sort(pooled.begin(), pooled.end());
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
  if (pooled.size() < 8)
    throw DegenerateConfiguration("epipolar vote: fewer than 8 pooled features");

  std::vector<Point2> pl(pooled.size()), pr(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    pl[i] = traj.at(pooled[i], frame_l);
    pr[i] = traj.at(pooled[i], frame_r);
  }
  const FundamentalMatrix f = estimate_fundamental(pl, pr, frame_l, frame_r);

  auto side_distance = [&](const std::vector<int>& feats) {
    double sum = 0.0;
    int used = 0;
    for (int k : feats) {
      const auto sd = sampson_distance(f, traj.at(k, frame_l), traj.at(k, frame_r));
      if (!sd) continue;
      sum += *sd;
      ++used;
    }
    if (used == 0)
      throw DegenerateConfiguration("epipolar vote: no scorable feature");
    return sum / used;
  };

  return std::max(side_distance(lo.feature_ids), side_distance(hi.feature_ids));
}

// One round's additive affinity: exp(-lambda * d_epipolar * d_motion).
// Grows toward 1 as either distance vanishes, decays as their product grows.
inline double affinity_contribution(double d_epipolar, double d_motion,
                                    double lambda) {
  return std::exp(-lambda * d_epipolar * d_motion);
}

// Superposition of the epipolar and motion-derivative distances over randomly
// sampled rounds and well-separated frame pairs. Labels never move during
// accumulation; Z is read-only until clustering. Degenerate rounds are
// skipped, so a pair with no successful round keeps Z[j,k] = 0.
inline SymmetricMatrix accumulate_affinity(std::span<const MotionModel> models,
                                           std::span<const Atom> atoms,
                                           const TrajectorySet& traj,
                                           const VotingParams& params) {
  params.validate();
  const int m = static_cast<int>(models.size());
  const int l_count = traj.frame_count;
  SymmetricMatrix z(m);
  Rng rng(params.seed);

  const std::vector<double> sigma = motion_sigma(atoms, l_count);
  const int min_sep = std::max(2, l_count / 3);

  for (int j = 0; j < m; ++j) {
    for (int k = j + 1; k < m; ++k) {
      for (int round = 0; round < params.rounds; ++round) {
        // frames for this round; nested outermost-first pairs keep the
        // separations wide, which is what separates different motions
        const int take = std::min(params.frames_used, l_count);
        std::vector<std::size_t> frames = rng.sample_distinct(l_count, take);
        std::sort(frames.begin(), frames.end());

        std::vector<std::pair<int, int>> pairs;
        for (int i = 0; 2 * i + 1 < take; ++i) {
          const int a = static_cast<int>(frames[i]);
          const int b = static_cast<int>(frames[take - 1 - i]);
          if (b - a >= min_sep) pairs.emplace_back(a, b);
        }
        if (pairs.empty()) {
          const int a = static_cast<int>(frames.front());
          const int b = static_cast<int>(frames.back());
          pairs.emplace_back((b - a >= 2) ? std::make_pair(a, b)
                                          : std::make_pair(0, l_count - 1));
        }

        double d_motion = 0.0;
        int d_motion_terms = 0;
        for (std::size_t fr : frames) {
          if (fr == 0) continue;
          d_motion += motion_distance(models[j], models[k], static_cast<int>(fr),
                                      sigma[fr]);
          ++d_motion_terms;
        }
        if (d_motion_terms > 0) d_motion /= d_motion_terms;

        for (const auto& [fl, frr] : pairs) {
          try {
            const double d_ep = epipolar_pair_distance(models[j], models[k], atoms,
                                                       traj, fl, frr, rng);
            z.add(j, k,
                  affinity_contribution(d_ep, d_motion, params.lambda_affinity));
          } catch (const DegenerateConfiguration&) {
            // skipped round
          }
        }
      }
    }
  }

  double max_off = 0.0;
  for (int j = 0; j < m; ++j)
    for (int k = j + 1; k < m; ++k) max_off = std::max(max_off, z(j, k));
  for (int j = 0; j < m; ++j) z.set(j, j, max_off);
  return z;
}

// Normalized spectral clustering of the affinity matrix into C coarse labels:
// D^(-1/2) Z D^(-1/2), top-C eigenvectors, row normalization, k-means. The
// k-means step restarts a few times and keeps the lowest inertia.
inline std::vector<int> coarsen(std::span<const MotionModel> models,
                                const SymmetricMatrix& z, int c,
                                std::uint64_t seed) {
  const std::size_t n = z.size();
  if (models.size() != n)
    throw std::invalid_argument("coarsen: model count and Z size differ");
  if (c < 1 || static_cast<std::size_t>(c) > n)
    throw std::invalid_argument("coarsen: need 1 <= C <= model count");

  std::vector<double> inv_sqrt_deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += z(i, j);
    inv_sqrt_deg[i] = (deg > 1e-300) ? 1.0 / std::sqrt(deg) : 0.0;
  }
  SymmetricMatrix norm(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      norm.set(i, j, z(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j]);

  const EigenDecomposition eig = eigen_symmetric(norm);
  Matrix rows(n, static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < n; ++i) {
    double len2 = 0.0;
    for (int j = 0; j < c; ++j) {
      rows(i, j) = eig.eigenvectors(i, j);
      len2 += rows(i, j) * rows(i, j);
    }
    if (len2 > 1e-300) {
      const double inv = 1.0 / std::sqrt(len2);
      for (int j = 0; j < c; ++j) rows(i, j) *= inv;
    }
  }

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < 8; ++restart) {
    const auto r = kmeans(rows, c, derive_seed(seed, "kmeans" + std::to_string(restart)));
    if (r.inertia < best.inertia) best = r;
  }
  return best.labels;
}

}  // namespace laav
