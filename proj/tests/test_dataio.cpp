#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

#include "laav/dataio.hpp"
#include "laav/geometry.hpp"

using namespace laav;

TEST_CASE("synth: translation motion displaces every feature identically") {
  SceneSpec spec;
  spec.num_motions = 1;
  spec.features_per_motion = {15};
  spec.frame_count = 8;
  spec.kinds = {MotionKind::Translation};
  spec.seed = 4;
  const auto traj = synth_scene(spec);

  const double dx = traj.at(0, 1).x - traj.at(0, 0).x;
  const double dy = traj.at(0, 1).y - traj.at(0, 0).y;
  CHECK(std::hypot(dx, dy) > 0.1);
  for (int k = 0; k < traj.feature_count; ++k)
    for (int t = 0; t + 1 < traj.frame_count; ++t) {
      CHECK(traj.at(k, t + 1).x - traj.at(k, t).x == doctest::Approx(dx).epsilon(1e-12));
      CHECK(traj.at(k, t + 1).y - traj.at(k, t).y == doctest::Approx(dy).epsilon(1e-12));
    }
}

TEST_CASE("synth: ground truth reflects the construction groups") {
  SceneSpec spec;
  spec.num_motions = 2;
  spec.features_per_motion = {12, 18};
  spec.frame_count = 10;
  spec.seed = 9;
  const auto traj = synth_scene(spec);
  REQUIRE(traj.ground_truth.has_value());
  REQUIRE(traj.feature_count == 30);
  for (int k = 0; k < 12; ++k) CHECK((*traj.ground_truth)[k] == 0);
  for (int k = 12; k < 30; ++k) CHECK((*traj.ground_truth)[k] == 1);
}

TEST_CASE("synth: recurrence matches the closed-form rotation field") {
  detail::MotionRecurrence mo;
  const double omega = 0.037;
  mo.linear[0][0] = std::cos(omega);
  mo.linear[0][1] = -std::sin(omega);
  mo.linear[1][0] = std::sin(omega);
  mo.linear[1][1] = std::cos(omega);
  mo.anchor0 = {100.0, 50.0};
  mo.velocity = {0.8, -0.4};

  const Point2 x0{131.0, 44.0};
  Point2 x = x0;
  for (int t = 0; t < 25; ++t) {
    // closed form: x(t) = p(t) + R(omega t) (x0 - p(0))
    const double c = std::cos(omega * t), s = std::sin(omega * t);
    const double rx = x0.x - mo.anchor0.x, ry = x0.y - mo.anchor0.y;
    const Point2 want{mo.anchor0.x + mo.velocity.x * t + c * rx - s * ry,
                      mo.anchor0.y + mo.velocity.y * t + s * rx + c * ry};
    CHECK(std::abs(x.x - want.x) < 1e-12 * std::max(1.0, std::abs(want.x)));
    CHECK(std::abs(x.y - want.y) < 1e-12 * std::max(1.0, std::abs(want.y)));
    x = mo.step(x, t);
  }
}

TEST_CASE("synth: every frame pair of one motion is an exact affine map") {
  for (int idx : {0, 1}) {
    const auto traj = synth_scene(standard_scene_spec(idx));
    const auto& gt = *traj.ground_truth;
    for (int motion = 0; motion < traj.num_motions; ++motion) {
      std::vector<Point2> src, dst;
      for (int k = 0; k < traj.feature_count; ++k) {
        if (gt[k] != motion) continue;
        src.push_back(traj.at(k, 0));
        dst.push_back(traj.at(k, traj.frame_count - 1));
      }
      const auto t = fit_affine(src, dst);
      for (std::size_t i = 0; i < src.size(); ++i)
        CHECK(distance(apply_affine(t, src[i]), dst[i]) < 1e-9);
    }
  }
}

TEST_CASE("synth: each motion satisfies its own epipolar geometry exactly") {
  for (int idx : {0, 1}) {
    const auto traj = synth_scene(standard_scene_spec(idx));
    for (int motion = 0; motion < traj.num_motions; ++motion) {
      std::vector<Point2> pl, pr;
      for (int k = 0; k < traj.feature_count; ++k) {
        if ((*traj.ground_truth)[k] != motion) continue;
        pl.push_back(traj.at(k, 0));
        pr.push_back(traj.at(k, traj.frame_count - 1));
      }
      const auto f = estimate_fundamental(pl, pr, 0, traj.frame_count - 1);
      for (std::size_t i = 0; i < pl.size(); ++i) {
        const auto sd = sampson_distance(f, pl[i], pr[i]);
        REQUIRE(sd.has_value());
        CHECK(*sd < 1e-6);
      }
    }
  }
}

TEST_CASE("noise: sigma zero is the identity") {
  const auto traj = synth_scene(standard_scene_spec(2));
  const auto noisy = add_noise(traj, {0.0, 77});
  REQUIRE(noisy.points.size() == traj.points.size());
  CHECK(std::memcmp(noisy.points.data(), traj.points.data(),
                    traj.points.size() * sizeof(Point2)) == 0);
}

TEST_CASE("noise: empirical spread tracks sigma") {
  SceneSpec spec;
  spec.num_motions = 1;
  spec.features_per_motion = {500};
  spec.frame_count = 50;  // 50k coordinates -> 100k draws
  spec.seed = 3;
  const auto traj = synth_scene(spec);
  const auto noisy = add_noise(traj, {1.0, 123});

  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    for (double d : {noisy.points[i].x - traj.points[i].x,
                     noisy.points[i].y - traj.points[i].y}) {
      sum += d;
      sum2 += d * d;
      ++n;
    }
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sum2 / n - mean * mean);
  CHECK(std::abs(mean) < 0.05);
  CHECK(stddev > 0.95);
  CHECK(stddev < 1.05);
}

TEST_CASE("noise: same seed reproduces the same perturbation") {
  const auto traj = synth_scene(standard_scene_spec(0));
  const auto a = add_noise(traj, {0.5, 42});
  const auto b = add_noise(traj, {0.5, 42});
  CHECK(std::memcmp(a.points.data(), b.points.data(),
                    a.points.size() * sizeof(Point2)) == 0);
}

// ---------------------------------------------------------------------------

namespace {

// Dumb oracle: relabel the whole prediction vector per permutation and count.
double misclassification_oracle(const std::vector<int>& predicted,
                                const std::vector<int>& truth, int c) {
  std::vector<int> perm(c);
  for (int i = 0; i < c; ++i) perm[i] = i;
  int best = -1;
  do {
    int match = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
      if (perm[predicted[i]] == truth[i]) ++match;
    best = std::max(best, match);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return 1.0 - static_cast<double>(best) / predicted.size();
}

}  // namespace

TEST_CASE("misclassification: exact and globally swapped labelings score zero") {
  const std::vector<int> truth = {0, 0, 1, 1, 0, 1};
  CHECK(misclassification_error(truth, truth, 2) == 0.0);
  std::vector<int> swapped;
  for (int v : truth) swapped.push_back(1 - v);
  CHECK(misclassification_error(swapped, truth, 2) == 0.0);
}

TEST_CASE("misclassification: one wrong feature out of ten") {
  std::vector<int> truth(10, 0);
  for (int i = 5; i < 10; ++i) truth[i] = 1;
  std::vector<int> pred = truth;
  pred[0] = 1;
  CHECK(misclassification_error(pred, truth, 2) == doctest::Approx(0.1));
}

TEST_CASE("misclassification: equals the brute-force relabeling oracle") {
  Rng rng(1001);
  for (int trial = 0; trial < 300; ++trial) {
    const int c = 2 + static_cast<int>(rng.uniform_index(3));
    const int k = 2 + static_cast<int>(rng.uniform_index(49));
    std::vector<int> pred(k), truth(k);
    for (int i = 0; i < k; ++i) {
      pred[i] = static_cast<int>(rng.uniform_index(c));
      truth[i] = static_cast<int>(rng.uniform_index(c));
    }
    CHECK(misclassification_error(pred, truth, c) ==
          doctest::Approx(misclassification_oracle(pred, truth, c)).epsilon(1e-12));
  }
}

TEST_CASE("misclassification: invariant under permutations of predicted ids") {
  Rng rng(7);
  std::vector<int> pred(40), truth(40);
  for (int i = 0; i < 40; ++i) {
    pred[i] = static_cast<int>(rng.uniform_index(3));
    truth[i] = static_cast<int>(rng.uniform_index(3));
  }
  const double base = misclassification_error(pred, truth, 3);
  const int perms[][3] = {{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : perms) {
    std::vector<int> relabeled;
    for (int v : pred) relabeled.push_back(p[v]);
    CHECK(misclassification_error(relabeled, truth, 3) == doctest::Approx(base));
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("format: save then load is the identity") {
  auto traj = synth_scene(standard_scene_spec(3));
  std::stringstream ss;
  save_trajectories(ss, traj);
  const auto back = load_trajectories(ss);

  CHECK(back.feature_count == traj.feature_count);
  CHECK(back.frame_count == traj.frame_count);
  CHECK(back.num_motions == traj.num_motions);
  REQUIRE(back.ground_truth.has_value());
  CHECK(*back.ground_truth == *traj.ground_truth);
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    CHECK(back.points[i].x == traj.points[i].x);  // bit-exact via %.17g
    CHECK(back.points[i].y == traj.points[i].y);
  }
}

TEST_CASE("format: minimal file without labels") {
  std::stringstream ss("LAAV-TRAJ 1\n3 2 0\n0 0 1 0\n0 1 1 1\n5 5 6 5\n");
  const auto traj = load_trajectories(ss);
  CHECK(traj.feature_count == 3);
  CHECK(traj.frame_count == 2);
  CHECK_FALSE(traj.ground_truth.has_value());
  CHECK(traj.at(2, 1).x == 6.0);
}

TEST_CASE("format: labels column populates ground truth") {
  std::stringstream ss(
      "# a comment\n"
      "LAAV-TRAJ 1\n"
      "2 2 2\n"
      "0 0 1 0 | 0\n"
      "9 9 9 8 | 1\n");
  const auto traj = load_trajectories(ss);
  REQUIRE(traj.ground_truth.has_value());
  CHECK((*traj.ground_truth)[0] == 0);
  CHECK((*traj.ground_truth)[1] == 1);
}

TEST_CASE("format: truncated row reports the offending row") {
  std::stringstream ss("LAAV-TRAJ 1\n2 3 0\n0 0 1 0 2 0\n0 1 1 1\n");
  try {
    load_trajectories(ss);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 4);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
}

TEST_CASE("format: partial labels are rejected") {
  std::stringstream ss("LAAV-TRAJ 1\n2 2 2\n0 0 1 0 | 0\n9 9 9 8\n");
  CHECK_THROWS_AS(load_trajectories(ss), ParseError);
}

TEST_CASE("format: bad magic is rejected") {
  std::stringstream ss("TRAJ 7\n2 2 0\n");
  CHECK_THROWS_AS(load_trajectories(ss), ParseError);
}

TEST_CASE("format: labeling round trip") {
  Labeling lab;
  lab.labels = {0, 1, 1, 2};
  lab.confidence = {1.0, 0.5, 0.25, 0.125};
  lab.source = {LabelSource::AtomDerived, LabelSource::RvAssigned,
                LabelSource::RvAssigned, LabelSource::AtomDerived};
  std::stringstream ss;
  save_labels(ss, lab);
  const auto back = load_labels(ss);
  CHECK(back.labels == lab.labels);
  CHECK(back.source == lab.source);
  for (std::size_t i = 0; i < lab.size(); ++i)
    CHECK(back.confidence[i] == doctest::Approx(lab.confidence[i]).epsilon(1e-6));
}
