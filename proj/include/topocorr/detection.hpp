#pragma once

// Zeros of a planar vector field: grid scan, Newton refinement with the exact
// jacobian, charge from the jacobian sign, winding-number cross-check.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "topocorr/field.hpp"
#include "topocorr/kinds.hpp"

namespace topocorr {

struct Singularity {
  double x = 0.0;
  double y = 0.0;
  SingularityKind kind;
  int charge = 0;           // sign of the jacobian determinant
  double residual = 0.0;    // |v| at the refined point
};

/// Anything that can be scanned: a point evaluator and an optional tensor-grid
/// evaluator (falls back to the point evaluator when empty).
struct PlanarField {
  std::function<VectorSample(double, double)> at;
  std::function<void(std::span<const double>, std::span<const double>, std::array<Eigen::MatrixXd, 2>&)>
      grid;
  double jacobian_scale = 1.0;
};

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  double area() const { return (x1 - x0) * (y1 - y0); }
};

struct DetectionOptions {
  double spacing = 0.1;        // grid cell side
  double merge_radius = 1e-6;  // refined points closer than this are one zero
  int max_newton = 30;
  double residual_tol = 1e-10;  // relative to jacobian_scale (times unit length)
};

struct DetectionDiagnostics {
  std::size_t cells = 0;
  std::size_t candidate_cells = 0;    // cells searched with Newton
  std::size_t winding_cells = 0;      // cells with nonzero winding number
  std::size_t winding_mismatches = 0; // winding != sum of charges found inside
  std::size_t newton_starts = 0;
  std::size_t newton_failures = 0;    // starts that did not converge
  std::size_t rejected_residual = 0;  // converged but residual above tolerance

  DetectionDiagnostics& operator+=(const DetectionDiagnostics& o);
};

struct DetectionResult {
  std::vector<Singularity> singularities;  // sorted by (x, y)
  DetectionDiagnostics diagnostics;
};

/// Winding number of v around the cell corners (counter-clockwise order).
int winding_number(std::span<const std::array<double, 2>, 4> corner_values);

DetectionResult detect(const PlanarField& field, const SingularityKind& kind, const Box& box,
                       const DetectionOptions& options);

/// Grid spacing giving about 1.5e-3 expected zeros per cell.
double default_spacing(const SingularityKind& kind, const CorrelationModel& model);

/// Scans the realization's whole window with default_spacing.
DetectionResult detect(const FieldRealization& field, const CorrelationModel& model);

}  // namespace topocorr
