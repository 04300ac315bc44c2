#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "laav/atoms.hpp"
#include "laav/dataio.hpp"

using namespace laav;

namespace {

// Hand-built trajectory: feature positions at frame 0 plus one constant
// translation per ground-truth group.
TrajectorySet translating_groups(const std::vector<Point2>& starts,
                                 const std::vector<int>& group,
                                 const std::vector<Point2>& velocity, int frames) {
  TrajectorySet traj;
  traj.feature_count = static_cast<int>(starts.size());
  traj.frame_count = frames;
  traj.num_motions = static_cast<int>(velocity.size());
  traj.ground_truth = group;
  for (std::size_t k = 0; k < starts.size(); ++k)
    for (int t = 0; t < frames; ++t)
      traj.points.push_back({starts[k].x + velocity[group[k]].x * t,
                             starts[k].y + velocity[group[k]].y * t});
  return traj;
}

}  // namespace

TEST_CASE("build_atoms: one rigid translation in one disc covers everything") {
  std::vector<Point2> starts;
  Rng rng(10);
  for (int i = 0; i < 12; ++i) {
    const double r = 25.0 * std::sqrt(rng.uniform());
    const double a = rng.uniform(0.0, 6.28318);
    starts.push_back({100.0 + r * std::cos(a), 100.0 + r * std::sin(a)});
  }
  const auto traj = translating_groups(starts, std::vector<int>(12, 0),
                                       {{2.0, 1.0}}, 6);
  AtomConstructionConfig cfg = AtomConstructionConfig::defaults_for(traj);
  cfg.seed = 5;
  const auto result = build_atoms(traj, cfg);
  CHECK(result.atoms.size() >= 1);
  CHECK(result.unassigned.empty());
}

TEST_CASE("build_atoms: two features cannot form an atom") {
  const auto traj = translating_groups({{0, 0}, {5, 0}}, {0, 0}, {{1.0, 0.0}}, 5);
  AtomConstructionConfig cfg;
  cfg.seed = 1;
  cfg.min_frame_separation = 1;
  const auto result = build_atoms(traj, cfg);
  CHECK(result.atoms.empty());
  CHECK(result.unassigned == std::vector<int>{0, 1});
}

TEST_CASE("build_atoms: distant clusters with different motions never mix") {
  std::vector<Point2> starts;
  std::vector<int> group;
  Rng rng(3);
  for (int c = 0; c < 2; ++c) {
    const double cx = (c == 0) ? 0.0 : 500.0;
    for (int i = 0; i < 10; ++i) {
      starts.push_back({cx + rng.uniform(-30.0, 30.0), rng.uniform(-30.0, 30.0)});
      group.push_back(c);
    }
  }
  const auto traj = translating_groups(starts, group, {{1.5, 0.0}, {-1.5, 0.5}}, 8);
  AtomConstructionConfig cfg = AtomConstructionConfig::defaults_for(traj);
  cfg.r2 = 50.0;
  cfg.r1 = 25.0;
  cfg.seed = 2;
  const auto result = build_atoms(traj, cfg);
  REQUIRE_FALSE(result.atoms.empty());
  for (const Atom& atom : result.atoms) {
    const int g0 = (*traj.ground_truth)[atom.feature_ids.front()];
    for (int f : atom.feature_ids) CHECK((*traj.ground_truth)[f] == g0);
  }
}

TEST_CASE("build_atoms: purity and coverage on the standard scenes") {
  for (int idx : {0, 1, 4, 5}) {
    const auto traj = synth_scene(standard_scene_spec(idx));
    AtomConstructionConfig cfg = AtomConstructionConfig::defaults_for(traj);
    cfg.seed = derive_seed(17, "atoms-test");
    const auto result = build_atoms(traj, cfg);
    REQUIRE_FALSE(result.atoms.empty());

    for (const Atom& atom : result.atoms) {
      REQUIRE(atom.feature_ids.size() >= 3);
      const int g0 = (*traj.ground_truth)[atom.feature_ids.front()];
      for (int f : atom.feature_ids) CHECK((*traj.ground_truth)[f] == g0);
      // members stay inside the R2 disc around the origin
      const Point2 origin = traj.at(atom.origin_feature, atom.frame_l);
      for (int f : atom.feature_ids)
        CHECK(distance(traj.at(f, atom.frame_l), origin) <= cfg.r2 + 1e-9);
    }

    const double covered =
        static_cast<double>(traj.feature_count - result.unassigned.size()) /
        traj.feature_count;
    CHECK(covered >= 0.9);
  }
}

TEST_CASE("build_atoms: R1 exclusion set is respected") {
  const auto traj = synth_scene(standard_scene_spec(2));
  AtomConstructionConfig cfg = AtomConstructionConfig::defaults_for(traj);
  cfg.seed = 23;
  const auto result = build_atoms(traj, cfg);
  REQUIRE(result.atoms.size() >= 2);

  for (std::size_t earlier = 0; earlier < result.atoms.size(); ++earlier) {
    const Atom& a = result.atoms[earlier];
    const Point2 origin = traj.at(a.origin_feature, a.frame_l);
    for (std::size_t later = earlier + 1; later < result.atoms.size(); ++later) {
      for (int f : result.atoms[later].feature_ids) {
        // No feature inside R1 of an earlier origin joins a later atom.
        CHECK(distance(traj.at(f, a.frame_l), origin) > cfg.r1);
      }
    }
  }
}

TEST_CASE("build_atoms: deterministic for a fixed seed") {
  const auto traj = synth_scene(standard_scene_spec(1));
  AtomConstructionConfig cfg = AtomConstructionConfig::defaults_for(traj);
  cfg.seed = 99;
  const auto a = build_atoms(traj, cfg);
  const auto b = build_atoms(traj, cfg);
  REQUIRE(a.atoms.size() == b.atoms.size());
  CHECK(a.unassigned == b.unassigned);
  for (std::size_t i = 0; i < a.atoms.size(); ++i) {
    CHECK(a.atoms[i].feature_ids == b.atoms[i].feature_ids);
    CHECK(a.atoms[i].origin_feature == b.atoms[i].origin_feature);
    CHECK(a.atoms[i].frame_l == b.atoms[i].frame_l);
    CHECK(a.atoms[i].frame_r == b.atoms[i].frame_r);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c)
        CHECK(a.atoms[i].transform.a[r][c] == b.atoms[i].transform.a[r][c]);
  }
}

// ---------------------------------------------------------------------------

namespace {

Atom stub_atom(int id, std::vector<int> features, Point2 centroid) {
  Atom a;
  a.id = id;
  a.feature_ids = std::move(features);
  a.origin_feature = a.feature_ids.front();
  a.centroid_per_frame = {centroid, centroid};
  return a;
}

}  // namespace

TEST_CASE("atom graph: overlapping atoms are linked") {
  std::vector<Atom> atoms;
  atoms.push_back(stub_atom(0, {0, 1, 2}, {0, 0}));
  atoms.push_back(stub_atom(1, {2, 3, 4}, {300, 0}));
  const auto edges = atom_overlap_graph_edges(atoms, 0);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0] == std::pair<int, int>(0, 1));
}

TEST_CASE("atom graph: single atom gives no edges") {
  std::vector<Atom> atoms;
  atoms.push_back(stub_atom(0, {0, 1, 2}, {0, 0}));
  CHECK(atom_overlap_graph_edges(atoms, 4).empty());
}

TEST_CASE("atom graph: five atoms on a line with k=2") {
  std::vector<Atom> atoms;
  for (int i = 0; i < 5; ++i)
    atoms.push_back(stub_atom(i, {10 * i, 10 * i + 1, 10 * i + 2},
                              {100.0 * i, 0.0}));
  const auto edges = atom_overlap_graph_edges(atoms, 2);
  std::set<std::pair<int, int>> got(edges.begin(), edges.end());
  // every interior atom is linked to both spatial neighbors
  for (int i = 1; i < 4; ++i) {
    CHECK(got.count({i - 1, i}) == 1);
    CHECK(got.count({i, i + 1}) == 1);
  }
  for (const auto& [i, j] : got) CHECK(i < j);
}
