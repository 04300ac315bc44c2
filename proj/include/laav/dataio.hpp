#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "laav/errors.hpp"
#include "laav/rng.hpp"
#include "laav/trajectory.hpp"

namespace laav {

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

enum class MotionKind { Translation, RotationTranslation, AffineDrift };

// Desk-scale scene generator: each motion is a spatially disjoint cluster of
// features driven by one per-frame affine recurrence, so every frame pair of a
// motion is related by an exact affine map and ground truth is exact.
struct SceneSpec {
  int num_motions = 2;  // C
  std::vector<int> features_per_motion;
  int frame_count = 20;  // L
  std::vector<MotionKind> kinds;     // empty -> default cycle
  double field_of_view = 640.0 * 480.0;  // pixels^2
  std::uint64_t seed = 0;

  void validate() const {
    if (num_motions < 1) throw std::invalid_argument("scene: C >= 1 required");
    if (static_cast<int>(features_per_motion.size()) != num_motions)
      throw std::invalid_argument("scene: one feature count per motion required");
    for (int n : features_per_motion)
      if (n < 10) throw std::invalid_argument("scene: >= 10 features per motion");
    if (frame_count < 5) throw std::invalid_argument("scene: L >= 5 required");
    if (!kinds.empty() && static_cast<int>(kinds.size()) != num_motions)
      throw std::invalid_argument("scene: one motion kind per motion required");
    if (field_of_view <= 0.0) throw std::invalid_argument("scene: empty field");
  }
};

struct NoiseSpec {
  double sigma_n = 0.0;  // pixels
  std::uint64_t seed = 0;
};

namespace detail {

struct MotionRecurrence {
  double linear[2][2] = {{1, 0}, {0, 1}};  // M
  Point2 anchor0;                          // p(0)
  Point2 velocity;                         // p(t) = p(0) + v t

  Point2 anchor(int t) const {
    return {anchor0.x + velocity.x * t, anchor0.y + velocity.y * t};
  }

  // x(t+1) = M (x(t) - p(t)) + p(t+1)
  Point2 step(const Point2& x, int t) const {
    const Point2 p = anchor(t);
    const Point2 q = anchor(t + 1);
    const double rx = x.x - p.x;
    const double ry = x.y - p.y;
    return {linear[0][0] * rx + linear[0][1] * ry + q.x,
            linear[1][0] * rx + linear[1][1] * ry + q.y};
  }
};

inline MotionRecurrence make_motion(const SceneSpec& spec, int m, Point2 center,
                                    Rng& rng) {
  MotionRecurrence mo;
  mo.anchor0 = center;

  const MotionKind kind =
      spec.kinds.empty()
          ? (m % 3 == 2 ? MotionKind::AffineDrift : MotionKind::RotationTranslation)
          : spec.kinds[m];

  const double angle = 2.0 * 3.14159265358979323846 * m / spec.num_motions +
                       3.14159265358979323846 / (2.0 * spec.num_motions) +
                       rng.uniform(-0.2, 0.2);
  const double speed = 0.6 + 0.25 * m + rng.uniform(0.0, 0.1);
  mo.velocity = {speed * std::cos(angle), speed * std::sin(angle)};

  const double omega =
      ((m % 2 == 0) ? 1.0 : -1.0) * (0.02 + 0.01 * m + rng.uniform(0.0, 0.004));
  switch (kind) {
    case MotionKind::Translation:
      break;  // M stays the identity
    case MotionKind::RotationTranslation: {
      const double c = std::cos(omega), s = std::sin(omega);
      mo.linear[0][0] = c; mo.linear[0][1] = -s;
      mo.linear[1][0] = s; mo.linear[1][1] = c;
      break;
    }
    case MotionKind::AffineDrift: {
      const double c = std::cos(omega), s = std::sin(omega);
      const double d = 0.006 + 0.002 * m;
      // rotation times a gentle anisotropic scale; growth stays bounded
      mo.linear[0][0] = c * (1.0 + d); mo.linear[0][1] = -s * (1.0 - d);
      mo.linear[1][0] = s * (1.0 + d); mo.linear[1][1] = c * (1.0 - d);
      break;
    }
  }
  return mo;
}

}  // namespace detail

inline TrajectorySet synth_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "synth"));

  const double side = std::sqrt(spec.field_of_view);
  const double ring = 0.33 * side;
  // wide clusters give the epipolar voting spatial leverage; shrink when many
  // motions share the ring so clusters stay disjoint over the whole sequence
  const double cluster_radius = (spec.num_motions <= 3 ? 0.13 : 0.07) * side;
  const Point2 mid{side / 2.0, side / 2.0};

  TrajectorySet traj;
  traj.num_motions = spec.num_motions;
  traj.frame_count = spec.frame_count;
  traj.ground_truth.emplace();

  std::vector<detail::MotionRecurrence> motions;
  for (int m = 0; m < spec.num_motions; ++m) {
    Point2 center = mid;
    if (spec.num_motions > 1) {
      const double a = 2.0 * 3.14159265358979323846 * m / spec.num_motions;
      center = {mid.x + ring * std::cos(a), mid.y + ring * std::sin(a)};
    }
    motions.push_back(detail::make_motion(spec, m, center, rng));
  }

  for (int m = 0; m < spec.num_motions; ++m) {
    for (int i = 0; i < spec.features_per_motion[m]; ++i) {
      // uniform draw in the cluster disc
      const double r = cluster_radius * std::sqrt(rng.uniform());
      const double a = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      Point2 x{motions[m].anchor0.x + r * std::cos(a),
               motions[m].anchor0.y + r * std::sin(a)};
      for (int t = 0; t < spec.frame_count; ++t) {
        traj.points.push_back(x);
        x = motions[m].step(x, t);
      }
      traj.ground_truth->push_back(m);
      ++traj.feature_count;
    }
  }

  // Separability guarantee: some pair of sample points must see the motion
  // fields differ by >= 2 px/frame.
  if (spec.num_motions > 1) {
    double max_diff = 0.0;
    for (int ma = 0; ma < spec.num_motions; ++ma)
      for (int mb = ma + 1; mb < spec.num_motions; ++mb)
        for (int t = 0; t + 1 < spec.frame_count; ++t)
          for (int corner = 0; corner < 4; ++corner) {
            const double ox = (corner & 1) ? cluster_radius : -cluster_radius;
            const double oy = (corner & 2) ? cluster_radius : -cluster_radius;
            const Point2 pa = motions[ma].anchor(t);
            const Point2 sample{pa.x + ox, pa.y + oy};
            const Point2 da = motions[ma].step(sample, t);
            const Point2 db = motions[mb].step(sample, t);
            const double diff =
                std::hypot(da.x - db.x, da.y - db.y);
            max_diff = std::max(max_diff, diff);
          }
    if (max_diff < 2.0)
      throw std::logic_error("synth_scene: motions not separable");
  }

  traj.validate();
  return traj;
}

// i.i.d. Gaussian(0, sigma^2) on each coordinate; ground truth untouched.
// sigma == 0 returns the input bit-identically.
inline TrajectorySet add_noise(const TrajectorySet& traj, const NoiseSpec& noise) {
  if (noise.sigma_n < 0.0) throw std::invalid_argument("noise: sigma >= 0 required");
  TrajectorySet out = traj;
  if (noise.sigma_n == 0.0) return out;
  Rng rng(derive_seed(noise.seed, "noise"));
  for (Point2& p : out.points) {
    p.x += noise.sigma_n * rng.normal();
    p.y += noise.sigma_n * rng.normal();
  }
  return out;
}

// One scene of the fixed synthetic evaluation suite. Index selects size,
// motion count and frame count deterministically.
inline SceneSpec standard_scene_spec(int index) {
  SceneSpec s;
  s.seed = 1000 + static_cast<std::uint64_t>(index);
  s.num_motions = (index % 2 == 0) ? 2 : 3;
  const int base = 52 + 13 * (index % 7);
  const int per = (s.num_motions == 3) ? std::min(base, 120) : base;
  for (int c = 0; c < s.num_motions; ++c)
    s.features_per_motion.push_back(per + 6 * c);
  s.frame_count = 12 + (index * 5) % 19;
  return s;
}

// ---------------------------------------------------------------------------
// Misclassification error
// ---------------------------------------------------------------------------

// Fraction of features wrongly labeled under the best permutation of the
// predicted label ids. Exhaustive permutation search; C stays tiny here.
inline double misclassification_error(const std::vector<int>& predicted,
                                      const std::vector<int>& truth, int c) {
  if (predicted.size() != truth.size() || predicted.empty())
    throw std::invalid_argument("misclassification: label vectors must match");
  if (c < 1 || c > 8) throw std::invalid_argument("misclassification: bad C");
  for (int v : predicted)
    if (v < 0 || v >= c) throw std::invalid_argument("misclassification: label out of range");
  for (int v : truth)
    if (v < 0 || v >= c) throw std::invalid_argument("misclassification: label out of range");

  std::vector<std::vector<int>> confusion(c, std::vector<int>(c, 0));
  for (std::size_t i = 0; i < predicted.size(); ++i)
    ++confusion[predicted[i]][truth[i]];

  std::vector<int> perm(c);
  for (int i = 0; i < c; ++i) perm[i] = i;
  int best_match = 0;
  do {
    int match = 0;
    for (int p = 0; p < c; ++p) match += confusion[p][perm[p]];
    best_match = std::max(best_match, match);
  } while (std::next_permutation(perm.begin(), perm.end()));

  return 1.0 - static_cast<double>(best_match) / static_cast<double>(predicted.size());
}

// ---------------------------------------------------------------------------
// Trajectory interchange format
// ---------------------------------------------------------------------------
//
//   line 1:      LAAV-TRAJ 1
//   line 2:      K L C
//   lines 3..:   x_1 y_1 x_2 y_2 ... x_L y_L [| g]
//   '#' starts a comment line.

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void save_trajectories(std::ostream& os, const TrajectorySet& traj) {
  os << "LAAV-TRAJ 1\n";
  os << traj.feature_count << ' ' << traj.frame_count << ' ' << traj.num_motions
     << '\n';
  for (int k = 0; k < traj.feature_count; ++k) {
    for (int l = 0; l < traj.frame_count; ++l) {
      const Point2 p = traj.at(k, l);
      if (l) os << ' ';
      os << detail::format_double(p.x) << ' ' << detail::format_double(p.y);
    }
    if (traj.ground_truth) os << " | " << (*traj.ground_truth)[k];
    os << '\n';
  }
}

inline void save_trajectories(const std::string& path, const TrajectorySet& traj) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  save_trajectories(os, traj);
}

inline TrajectorySet load_trajectories(std::istream& is) {
  TrajectorySet traj;
  std::string line;
  int line_no = 0;
  int stage = 0;  // 0 magic, 1 header, 2 rows
  int rows_read = 0;
  bool saw_label = false;

  while (std::getline(is, line)) {
    ++line_no;
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;

    std::istringstream ss(line);
    if (stage == 0) {
      std::string magic;
      int version = 0;
      ss >> magic >> version;
      if (magic != "LAAV-TRAJ" || version != 1)
        throw ParseError(line_no, "expected magic 'LAAV-TRAJ 1'");
      stage = 1;
      continue;
    }
    if (stage == 1) {
      if (!(ss >> traj.feature_count >> traj.frame_count >> traj.num_motions))
        throw ParseError(line_no, "expected header 'K L C'");
      if (traj.feature_count < 1 || traj.frame_count < 2)
        throw ParseError(line_no, "need K >= 1 and L >= 2");
      if (traj.num_motions < 0)
        throw ParseError(line_no, "negative motion count");
      traj.points.reserve(static_cast<std::size_t>(traj.feature_count) *
                          traj.frame_count);
      stage = 2;
      continue;
    }

    if (rows_read >= traj.feature_count)
      throw ParseError(line_no, "more feature rows than K");

    // split off an optional "| g" tail
    std::string coords = line;
    std::optional<int> label;
    const std::size_t bar = line.find('|');
    if (bar != std::string::npos) {
      coords = line.substr(0, bar);
      std::istringstream ls(line.substr(bar + 1));
      int g = 0;
      if (!(ls >> g)) throw ParseError(line_no, "expected label after '|'");
      std::string extra;
      if (ls >> extra) throw ParseError(line_no, "trailing content after label");
      label = g;
    }

    std::istringstream cs(coords);
    std::vector<double> vals;
    double v = 0.0;
    while (cs >> v) vals.push_back(v);
    if (!cs.eof()) throw ParseError(line_no, "bad coordinate token");
    if (static_cast<int>(vals.size()) != 2 * traj.frame_count)
      throw DimensionMismatch(
          line_no, "feature row " + std::to_string(rows_read) + " has " +
                       std::to_string(vals.size()) + " coordinates, expected " +
                       std::to_string(2 * traj.frame_count));
    for (int l = 0; l < traj.frame_count; ++l)
      traj.points.push_back({vals[2 * l], vals[2 * l + 1]});

    if (label) {
      if (rows_read > 0 && !saw_label)
        throw ParseError(line_no, "label present on some rows only");
      saw_label = true;
      if (!traj.ground_truth) traj.ground_truth.emplace();
      traj.ground_truth->push_back(*label);
    } else if (saw_label) {
      throw ParseError(line_no, "label missing on this row");
    }
    ++rows_read;
  }

  if (stage < 2) throw ParseError(line_no, "truncated file");
  if (rows_read != traj.feature_count)
    throw ParseError(line_no, "expected " + std::to_string(traj.feature_count) +
                                  " feature rows, found " + std::to_string(rows_read));
  try {
    traj.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(line_no, e.what());
  }
  return traj;
}

inline TrajectorySet load_trajectories(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return load_trajectories(is);
}

// ---------------------------------------------------------------------------
// Labeling output
// ---------------------------------------------------------------------------
//
//   LAAV-LABELS 1
//   feature_id label confidence source

inline void save_labels(std::ostream& os, const Labeling& labeling) {
  os << "LAAV-LABELS 1\n";
  char buf[32];
  for (std::size_t k = 0; k < labeling.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.6f", labeling.confidence[k]);
    os << k << ' ' << labeling.labels[k] << ' ' << buf << ' '
       << (labeling.source[k] == LabelSource::AtomDerived ? "atom" : "rv") << '\n';
  }
}

inline void save_labels(const std::string& path, const Labeling& labeling) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  save_labels(os, labeling);
}

inline Labeling load_labels(std::istream& is) {
  Labeling out;
  std::string line;
  int line_no = 0;
  bool saw_magic = false;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    std::istringstream ss(line);
    if (!saw_magic) {
      std::string magic;
      int version = 0;
      ss >> magic >> version;
      if (magic != "LAAV-LABELS" || version != 1)
        throw ParseError(line_no, "expected magic 'LAAV-LABELS 1'");
      saw_magic = true;
      continue;
    }
    std::size_t id = 0;
    int label = 0;
    double conf = 0.0;
    std::string source;
    if (!(ss >> id >> label >> conf >> source))
      throw ParseError(line_no, "expected 'feature_id label confidence source'");
    if (id != out.labels.size())
      throw ParseError(line_no, "feature ids must be dense and ordered");
    out.labels.push_back(label);
    out.confidence.push_back(conf);
    out.source.push_back(source == "atom" ? LabelSource::AtomDerived
                                          : LabelSource::RvAssigned);
  }
  if (!saw_magic) throw ParseError(line_no, "truncated file");
  return out;
}

inline Labeling load_labels(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return load_labels(is);
}

// ---------------------------------------------------------------------------
// Metrics output: one "name value" pair per line.
// ---------------------------------------------------------------------------

using Metrics = std::vector<std::pair<std::string, std::string>>;

inline std::string metric_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline void save_metrics(std::ostream& os, const Metrics& metrics) {
  for (const auto& [name, value] : metrics) os << name << ' ' << value << '\n';
}

inline void save_metrics(const std::string& path, const Metrics& metrics) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  save_metrics(os, metrics);
}

}  // namespace laav
