#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "laav/atoms.hpp"
#include "laav/errors.hpp"
#include "laav/geometry.hpp"
#include "laav/numerics.hpp"
#include "laav/trajectory.hpp"

namespace laav {

struct WeightedEdge {
  int i = 0;
  int j = 0;
  double w = 0.0;  // signed: positive attracts, negative repels
};

struct WeightedGraph {
  int node_count = 0;
  std::vector<WeightedEdge> edges;

  void validate() const {
    std::vector<std::pair<int, int>> seen;
    for (const auto& e : edges) {
      if (!(0 <= e.i && e.i < e.j && e.j < node_count))
        throw std::invalid_argument("graph: edge endpoints out of order or range");
      if (!std::isfinite(e.w)) throw std::invalid_argument("graph: non-finite weight");
      seen.emplace_back(e.i, e.j);
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
      throw std::invalid_argument("graph: duplicate edge");
  }
};

struct Decomposition {
  std::vector<int> node_labels;  // contiguous ids in [0, component_count)
  int component_count = 0;
  double objective = 0.0;  // total weight of cut edges
};

// Total weight of edges whose endpoints carry different labels, summed in
// edge order so greedy and exact objectives compare exactly.
inline double multicut_cut_cost(const WeightedGraph& g, const std::vector<int>& labels) {
  double cost = 0.0;
  for (const auto& e : g.edges)
    if (labels[e.i] != labels[e.j]) cost += e.w;
  return cost;
}

// True when every component is connected in the subgraph of uncut edges,
// i.e. the cut edge set is a valid multicut.
inline bool multicut_feasible(const WeightedGraph& g, const std::vector<int>& labels) {
  std::vector<int> root(g.node_count);
  for (int i = 0; i < g.node_count; ++i) root[i] = i;
  std::function<int(int)> find = [&](int x) {
    while (root[x] != x) x = root[x] = root[root[x]];
    return x;
  };
  for (const auto& e : g.edges)
    if (labels[e.i] == labels[e.j]) root[find(e.i)] = find(e.j);
  // same label must imply same connectivity class
  std::vector<int> class_of_label;
  for (int i = 0; i < g.node_count; ++i) {
    const int lbl = labels[i];
    if (lbl >= static_cast<int>(class_of_label.size()))
      class_of_label.resize(lbl + 1, -1);
    const int r = find(i);
    if (class_of_label[lbl] == -1)
      class_of_label[lbl] = r;
    else if (class_of_label[lbl] != r)
      return false;
  }
  return true;
}

// Log-odds style mapping from a forward-backward error to a signed edge
// weight: w = log(2 e^(-fb/scale) / (2 - 2 e^(-fb/scale) + eps)), clipped to
// [-10, 10]. Positive when fb << scale, negative when fb >> scale, zero at
// fb = scale * ln 2.
inline double edge_weight_from_affinity(double fb_error, double scale) {
  if (fb_error < 0.0 || scale <= 0.0)
    throw std::invalid_argument("edge weight: need fb_error >= 0, scale > 0");
  constexpr double eps = 1e-12;
  const double attract = 2.0 * std::exp(-fb_error / scale);
  const double repel = 2.0 - attract + eps;
  const double w = std::log(attract / repel);
  return std::clamp(w, -10.0, 10.0);
}

namespace detail {

// Greedy additive edge contraction: repeatedly merge the component pair with
// the largest total inter-component weight. Without force_target the loop
// stops once no positive pair remains (never dropping below target); with it,
// merging continues through zero and negative weights until exactly target
// components remain.
inline Decomposition greedy_contraction(const WeightedGraph& g, int target_components,
                                        bool force_target) {
  const int n = g.node_count;
  if (n < 1 || target_components < 1)
    throw std::invalid_argument("multicut: need nodes and target >= 1");

  std::vector<int> comp_of(n);
  for (int i = 0; i < n; ++i) comp_of[i] = i;
  std::vector<char> alive(n, 1);
  Matrix w(n, n);
  for (const auto& e : g.edges) {
    w(e.i, e.j) += e.w;
    w(e.j, e.i) += e.w;
  }

  int count = n;
  while (count > target_components) {
    int best_a = -1, best_b = -1;
    double best_w = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) {
      if (!alive[a]) continue;
      for (int b = a + 1; b < n; ++b) {
        if (!alive[b]) continue;
        if (w(a, b) > best_w) {
          best_w = w(a, b);
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best_a < 0) break;
    if (!force_target && best_w <= 0.0) break;

    // merge best_b into best_a (the smaller index stays)
    for (int c = 0; c < n; ++c) {
      if (!alive[c] || c == best_a || c == best_b) continue;
      w(best_a, c) += w(best_b, c);
      w(c, best_a) = w(best_a, c);
    }
    alive[best_b] = 0;
    for (int i = 0; i < n; ++i)
      if (comp_of[i] == best_b) comp_of[i] = best_a;
    --count;
  }

  Decomposition out;
  out.node_labels.assign(n, -1);
  std::vector<int> label_of_rep(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int rep = comp_of[i];
    if (label_of_rep[rep] == -1) label_of_rep[rep] = next++;
    out.node_labels[i] = label_of_rep[rep];
  }
  out.component_count = next;
  out.objective = multicut_cut_cost(g, out.node_labels);
  return out;
}

}  // namespace detail

// Heuristic minimum-cost multicut: greedy additive contraction. Merging only
// joins component pairs with positive total weight, so every returned
// decomposition is feasible; it stops early once component_count reaches
// target_components.
inline Decomposition solve_multicut_greedy(const WeightedGraph& g,
                                           int target_components = 1) {
  return detail::greedy_contraction(g, target_components, false);
}

// Exact minimum over all set partitions, for small graphs only. Ties broken
// by fewer components, then lexicographically smaller label vector.
inline Decomposition solve_multicut_exact(const WeightedGraph& g) {
  const int n = g.node_count;
  if (n > 12) throw TooLarge("exact multicut: more than 12 nodes");
  if (n < 1) throw std::invalid_argument("exact multicut: empty graph");

  // edges grouped by their higher endpoint for incremental cost updates
  std::vector<std::vector<std::pair<int, double>>> lower(n);
  for (const auto& e : g.edges) lower[e.j].emplace_back(e.i, e.w);

  std::vector<int> labels(n, 0);
  std::vector<int> best_labels;
  double best_cost = std::numeric_limits<double>::infinity();
  int best_count = 0;

  auto consider = [&](double cost) {
    int count = 0;
    for (int i = 0; i < n; ++i) count = std::max(count, labels[i] + 1);
    if (!best_labels.empty()) {
      if (cost > best_cost) return;
      if (cost == best_cost) {
        if (count > best_count) return;
        if (count == best_count && labels >= best_labels) return;
      }
    }
    if (!multicut_feasible(g, labels)) return;
    best_cost = cost;
    best_count = count;
    best_labels = labels;
  };

  std::function<void(int, int, double)> rec = [&](int i, int max_label, double cost) {
    if (i == n) {
      consider(cost);
      return;
    }
    for (int lbl = 0; lbl <= std::min(max_label + 1, i); ++lbl) {
      double delta = 0.0;
      for (const auto& [j, wij] : lower[i])
        if (labels[j] != lbl) delta += wij;
      labels[i] = lbl;
      rec(i + 1, std::max(max_label, lbl), cost + delta);
    }
    labels[i] = 0;
  };
  labels[0] = 0;
  rec(1, 0, 0.0);

  Decomposition out;
  out.node_labels = best_labels;
  out.component_count = best_count;
  out.objective = best_cost;
  return out;
}

// ---------------------------------------------------------------------------
// Fine motion models from atoms
// ---------------------------------------------------------------------------

struct FineModelConfig {
  int k_neighbors = 4;
  double weight_scale = 3.0;  // pixels; affinity-to-weight scale
};

// Per-atom fine model ids in [0, 2C): overlap graph, pairwise
// forward-backward errors on edges, log-odds weights, then contraction forced
// to exactly 2C non-empty models (continuing through zero or negative merges
// when the positive weights run out first).
inline std::vector<int> fine_models_from_atoms(std::span<const Atom> atoms,
                                               const TrajectorySet& traj,
                                               const FineModelConfig& cfg,
                                               int two_c) {
  const int n = static_cast<int>(atoms.size());
  if (n < two_c)
    throw InsufficientAtoms("fine models: fewer atoms than requested models");

  // noisy tracks inflate same-motion round-trip errors, so the weight scale
  // follows the estimated track noise
  const double scale =
      std::max(cfg.weight_scale, 3.0 * estimate_noise_sigma(traj));

  WeightedGraph g;
  g.node_count = n;
  for (const auto& [ia, ib] : atom_overlap_graph_edges(atoms, cfg.k_neighbors)) {
    const Atom& a = atoms[ia];
    const Atom& b = atoms[ib];
    const int l = a.frame_l;
    const int r = a.frame_r;

    std::vector<Point2> b_src(b.feature_ids.size()), b_dst(b.feature_ids.size());
    for (std::size_t t = 0; t < b.feature_ids.size(); ++t) {
      b_src[t] = traj.at(b.feature_ids[t], l);
      b_dst[t] = traj.at(b.feature_ids[t], r);
    }

    AffineTransform back;
    try {
      back = fit_affine(b_dst, b_src, r, l);  // the other atom's r -> l map
    } catch (const DegenerateConfiguration&) {
      continue;  // no usable affinity for this pair
    }

    // probe the union of both atoms' features at the shared frame pair
    std::vector<int> probe = a.feature_ids;
    probe.insert(probe.end(), b.feature_ids.begin(), b.feature_ids.end());
    std::sort(probe.begin(), probe.end());
    probe.erase(std::unique(probe.begin(), probe.end()), probe.end());
    std::vector<Point2> src(probe.size()), dst(probe.size());
    for (std::size_t t = 0; t < probe.size(); ++t) {
      src[t] = traj.at(probe[t], l);
      dst[t] = traj.at(probe[t], r);
    }

    const double fb = forward_backward_error(a.transform, src, dst, back);
    g.edges.push_back({ia, ib, edge_weight_from_affinity(fb, scale)});
  }

  const Decomposition d = detail::greedy_contraction(g, two_c, true);
  return d.node_labels;
}

}  // namespace laav
