#pragma once

#include <stdexcept>
#include <string>

namespace laav {

// Rank-deficient linear system (collinear or coincident input points upstream).
struct DegenerateSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative diagonalization exceeded its sweep budget.
struct NoConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Geometric configuration that admits no well-defined model
// (collinear affine supports, degenerate epipolar point sets, ...).
struct DegenerateConfiguration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact solver asked to enumerate beyond its size guard.
struct TooLarge : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Fewer atoms than the requested number of fine motion models.
struct InsufficientAtoms : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A voting group lost all of its members; the trial restarts.
struct GroupCollapse : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed trajectory or label file. Carries the 1-based line number.
struct ParseError : std::runtime_error {
  int line;
  ParseError(int line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
        line(line_no) {}
};

// Feature row with the wrong number of coordinates.
struct DimensionMismatch : ParseError {
  DimensionMismatch(int line_no, const std::string& what)
      : ParseError(line_no, what) {}
};

}  // namespace laav
