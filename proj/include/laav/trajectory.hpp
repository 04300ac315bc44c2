#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "laav/geometry.hpp"

namespace laav {

// K feature trajectories over L frames, with optional ground-truth motion
// labels in [0, C). The pipeline input.
struct TrajectorySet {
  int feature_count = 0;  // K
  int frame_count = 0;    // L
  int num_motions = 0;    // C, the true number of independent motions
  std::vector<Point2> points;  // row-major, feature k at frame l = points[k * L + l]
  std::optional<std::vector<int>> ground_truth;

  Point2 at(int feature, int frame) const {
    return points[static_cast<std::size_t>(feature) * frame_count + frame];
  }
  Point2& at(int feature, int frame) {
    return points[static_cast<std::size_t>(feature) * frame_count + frame];
  }

  void validate() const {
    if (feature_count < 1 || frame_count < 2)
      throw std::invalid_argument("trajectory set: need K >= 1, L >= 2");
    if (points.size() !=
        static_cast<std::size_t>(feature_count) * static_cast<std::size_t>(frame_count))
      throw std::invalid_argument("trajectory set: point buffer size mismatch");
    for (const Point2& p : points)
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw std::invalid_argument("trajectory set: non-finite coordinate");
    if (ground_truth) {
      if (static_cast<int>(ground_truth->size()) != feature_count)
        throw std::invalid_argument("trajectory set: ground truth size mismatch");
      for (int g : *ground_truth)
        if (g < 0 || g >= num_motions)
          throw std::invalid_argument("trajectory set: ground truth label out of range");
    }
  }
};

enum class LabelSource { AtomDerived, RvAssigned };

// Per-feature motion assignment, the pipeline output.
struct Labeling {
  std::vector<int> labels;         // in [0, C)
  std::vector<double> confidence;  // in [0, 1]
  std::vector<LabelSource> source;

  std::size_t size() const { return labels.size(); }
};

}  // namespace laav
