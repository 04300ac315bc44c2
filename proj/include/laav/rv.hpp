#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "laav/errors.hpp"
#include "laav/geometry.hpp"
#include "laav/numerics.hpp"
#include "laav/rng.hpp"
#include "laav/trajectory.hpp"

namespace laav {

struct RvParams {
  int m = 12;                // features sampled per group per iteration
  double lambda_vote = 4.0;  // voting strength
  double alpha = 0.9;        // histogram forgetting factor, (0, 1]
  int max_iterations = 150;
  int max_trials = 10;
  double locked_weight = 5.0;  // extra histogram weight for pre-labeled features
  double flip_factor = 2.0;    // a locked label flips only past this score ratio
  bool lock_initial = true;    // false: initial labels only warm-start the groups
  std::uint64_t seed = 0;

  void validate() const {
    if (m < 8) throw std::invalid_argument("rv: m >= 8 (F needs 8 features)");
    if (alpha <= 0.0 || alpha > 1.0) throw std::invalid_argument("rv: alpha in (0,1]");
    if (lambda_vote <= 0.0) throw std::invalid_argument("rv: lambda_vote > 0");
    if (max_iterations < 1 || max_trials < 1)
      throw std::invalid_argument("rv: iteration and trial caps >= 1");
    if (locked_weight < 1.0) throw std::invalid_argument("rv: locked_weight >= 1");
  }
};

// K x C voting scores. locked_weight is the extra weight pre-labeled features
// carry: it biases group sampling toward them and scales the score margin
// another group must clear before their label flips.
struct VoteHistogram {
  Matrix scores;  // K x C, non-negative
  double locked_weight = 1.0;
};

// One voting round: the whole histogram decays by alpha, then every feature
// gains e^(-lambda * SD(F_c, y^l, y^r)) per group with a usable F. Smaller
// Sampson distance means a strictly larger added score. Features whose
// Sampson denominator vanishes are skipped for that group.
inline void vote_round(VoteHistogram& hist,
                       std::span<const std::optional<FundamentalMatrix>> f_per_group,
                       const TrajectorySet& traj, int frame_l, int frame_r,
                       const RvParams& params) {
  const int k_count = traj.feature_count;
  const int c_count = static_cast<int>(f_per_group.size());

  for (int k = 0; k < k_count; ++k)
    for (int c = 0; c < c_count; ++c) hist.scores(k, c) *= params.alpha;

  for (int c = 0; c < c_count; ++c) {
    if (!f_per_group[c]) continue;
    const Mat3& f = f_per_group[c]->f;
    for (int k = 0; k < k_count; ++k) {
      const auto sd = sampson_distance(f, traj.at(k, frame_l), traj.at(k, frame_r));
      if (!sd) continue;
      hist.scores(k, c) += std::exp(-params.lambda_vote * *sd);
    }
  }
}

struct FinetuneResult {
  Labeling labeling;
  int iterations_used = 0;  // summed over all trials
  bool converged = false;
};

namespace detail {

// m draws without replacement, probability proportional to weight.
inline std::vector<int> weighted_sample(const std::vector<int>& items,
                                        const std::vector<double>& weights,
                                        std::size_t m, Rng& rng) {
  std::vector<int> pool = items;
  std::vector<double> w = weights;
  std::vector<int> out;
  out.reserve(m);
  while (out.size() < m && !pool.empty()) {
    double total = 0.0;
    for (double v : w) total += v;
    double ticket = rng.uniform() * total;
    std::size_t pick = 0;
    for (; pick + 1 < pool.size(); ++pick) {
      ticket -= w[pick];
      if (ticket <= 0.0) break;
    }
    out.push_back(pool[pick]);
    pool.erase(pool.begin() + pick);
    w.erase(w.begin() + pick);
  }
  return out;
}

}  // namespace detail

// Moderate randomized voting initialized from the labels the earlier stages
// produced. initial[k] in [0, C) locks feature k to its label (it only flips
// when another group's score clears flip_factor times its own); initial[k] < 0
// leaves the feature free and random-seeded. Labels are reassigned by row
// argmax each iteration; convergence means three consecutive iterations
// without a label change. A group losing all members aborts the trial, and up
// to max_trials trials run with fresh histograms and seeds.
inline FinetuneResult finetune(const TrajectorySet& traj,
                               const std::vector<int>& initial, int c,
                               const RvParams& params) {
  params.validate();
  const int k_count = traj.feature_count;
  const int l_count = traj.frame_count;
  if (static_cast<int>(initial.size()) != k_count)
    throw std::invalid_argument("rv: initial labeling size mismatch");
  if (c < 1) throw std::invalid_argument("rv: C >= 1");
  for (int v : initial)
    if (v >= c) throw std::invalid_argument("rv: initial label out of range");

  const int min_sep = std::min(std::max(2, l_count / 3), l_count - 1);

  std::vector<int> labels(k_count, 0);
  FinetuneResult result;
  VoteHistogram hist;
  hist.locked_weight = params.locked_weight;

  for (int trial = 0; trial < params.max_trials; ++trial) {
    Rng rng(derive_seed(params.seed, "trial" + std::to_string(trial)));

    for (int k = 0; k < k_count; ++k)
      labels[k] = (initial[k] >= 0) ? initial[k]
                                    : static_cast<int>(rng.uniform_index(c));

    hist.scores = Matrix(k_count, static_cast<std::size_t>(c));  // fresh per trial

    int stable = 0;
    bool collapsed = false;

    for (int iter = 0; iter < params.max_iterations; ++iter) {
      ++result.iterations_used;

      const int l = rng.uniform_int(0, l_count - 1 - min_sep);
      const int r = rng.uniform_int(l + min_sep, l_count - 1);

      std::vector<std::optional<FundamentalMatrix>> f_per_group(c);
      // sampling weight stays finite even when locking is absolute
      const double sampling_weight =
          params.lock_initial ? std::min(params.locked_weight, 1e12) : 1.0;
      for (int g = 0; g < c; ++g) {
        std::vector<int> members;
        std::vector<double> weights;
        for (int k = 0; k < k_count; ++k) {
          if (labels[k] != g) continue;
          members.push_back(k);
          weights.push_back(initial[k] >= 0 ? sampling_weight : 1.0);
        }
        if (members.empty()) {
          collapsed = true;
          break;
        }
        if (static_cast<int>(members.size()) < 8) continue;  // no vote this round

        const auto sample = detail::weighted_sample(
            members, weights, static_cast<std::size_t>(params.m), rng);
        std::vector<Point2> pl(sample.size()), pr(sample.size());
        for (std::size_t i = 0; i < sample.size(); ++i) {
          pl[i] = traj.at(sample[i], l);
          pr[i] = traj.at(sample[i], r);
        }
        try {
          f_per_group[g] = estimate_fundamental(pl, pr, l, r);
        } catch (const DegenerateConfiguration&) {
          // group abstains this round
        }
      }
      if (collapsed) break;

      vote_round(hist, f_per_group, traj, l, r, params);

      bool changed = false;
      for (int k = 0; k < k_count; ++k) {
        int best = 0;
        double best_score = hist.scores(k, 0);
        double row_sum = best_score;
        for (int g = 1; g < c; ++g) {
          const double s = hist.scores(k, g);
          row_sum += s;
          if (s > best_score) {
            best_score = s;
            best = g;
          }
        }
        int next = labels[k];
        if (row_sum > 0.0) {
          if (params.lock_initial && initial[k] >= 0) {
            // a locked label flips only when another group's score clears the
            // weighted margin; an infinite locked weight pins it forever
            // (inf * 0 compares false)
            next = (best_score > params.flip_factor * hist.locked_weight *
                                     hist.scores(k, initial[k]))
                       ? best
                       : initial[k];
          } else {
            next = best;
          }
        }
        if (next != labels[k]) {
          labels[k] = next;
          changed = true;
        }
      }

      stable = changed ? 0 : stable + 1;
      if (stable >= 3) {
        result.converged = true;
        break;
      }
    }

    if (result.converged) break;
  }

  result.labeling.labels = labels;
  result.labeling.confidence.assign(k_count, 0.0);
  result.labeling.source.assign(k_count, LabelSource::RvAssigned);
  for (int k = 0; k < k_count; ++k) {
    if (initial[k] >= 0 && labels[k] == initial[k])
      result.labeling.source[k] = LabelSource::AtomDerived;
    // winning share of the final histogram row
    double row_sum = 0.0;
    for (int g = 0; g < c; ++g) row_sum += hist.scores(k, g);
    result.labeling.confidence[k] =
        (row_sum > 0.0) ? hist.scores(k, labels[k]) / row_sum : 0.0;
  }
  return result;
}

}  // namespace laav
