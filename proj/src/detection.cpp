#include "topocorr/detection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "topocorr/analytic.hpp"
#include "topocorr/errors.hpp"

namespace topocorr {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kCellOccupancy = 1.5e-3;

struct NewtonOutcome {
  bool converged = false;
  double x = 0.0, y = 0.0;
  VectorSample sample;
};

NewtonOutcome newton(const PlanarField& field, double x, double y, double step_tol, int max_iter,
                     double give_up_distance) {
  NewtonOutcome out;
  const double x_start = x, y_start = y;
  VectorSample s = field.at(x, y);
  for (int it = 0; it < max_iter; ++it) {
    const auto& J = s.jac;
    const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    if (det == 0.0 || !std::isfinite(det)) return out;
    const double dx = (J[1][1] * s.v[0] - J[0][1] * s.v[1]) / det;
    const double dy = (J[0][0] * s.v[1] - J[1][0] * s.v[0]) / det;
    x -= dx;
    y -= dy;
    if (std::hypot(x - x_start, y - y_start) > give_up_distance) return out;
    s = field.at(x, y);
    if (std::hypot(dx, dy) <= step_tol) {
      out.converged = true;
      out.x = x;
      out.y = y;
      out.sample = s;
      return out;
    }
  }
  return out;
}

// Sorts by (x, y) and keeps the lowest-residual point of each cluster.
void merge_duplicates(std::vector<Singularity>& found, double radius) {
  std::sort(found.begin(), found.end(),
            [](const Singularity& a, const Singularity& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  std::vector<bool> dead(found.size(), false);
  for (std::size_t a = 0; a < found.size(); ++a) {
    if (dead[a]) continue;
    for (std::size_t b = a + 1; b < found.size() && found[b].x - found[a].x <= radius; ++b) {
      if (dead[b]) continue;
      if (std::hypot(found[b].x - found[a].x, found[b].y - found[a].y) <= radius) {
        if (found[b].residual < found[a].residual) std::swap(found[a], found[b]);
        dead[b] = true;
      }
    }
  }
  std::vector<Singularity> kept;
  for (std::size_t a = 0; a < found.size(); ++a)
    if (!dead[a] && found[a].charge != 0) kept.push_back(found[a]);
  found = std::move(kept);
}

int sign_of_det(const VectorSample& s) {
  const double det = s.jac[0][0] * s.jac[1][1] - s.jac[0][1] * s.jac[1][0];
  return det > 0 ? 1 : (det < 0 ? -1 : 0);
}

double wrapped(double d) { return std::remainder(d, 2 * kPi); }

// Angle swept by v along the segment p -> q, bisecting wherever consecutive
// samples differ by more than pi/4 so that zeros close to the segment are
// resolved.
double swept_angle(const PlanarField& field, double px, double py, double pa, double qx, double qy, double qa,
                   int depth) {
  const double d = wrapped(qa - pa);
  if (std::abs(d) <= 0.25 * kPi || depth >= 40) return d;
  const double mx = 0.5 * (px + qx), my = 0.5 * (py + qy);
  const VectorSample m = field.at(mx, my);
  const double ma = std::atan2(m.v[1], m.v[0]);
  return swept_angle(field, px, py, pa, mx, my, ma, depth + 1) + swept_angle(field, mx, my, ma, qx, qy, qa, depth + 1);
}

int edge_winding(const PlanarField& field, const Box& cell) {
  const double xs[4] = {cell.x0, cell.x1, cell.x1, cell.x0};
  const double ys[4] = {cell.y0, cell.y0, cell.y1, cell.y1};
  double angles[4];
  for (int k = 0; k < 4; ++k) {
    const VectorSample v = field.at(xs[k], ys[k]);
    angles[k] = std::atan2(v.v[1], v.v[0]);
  }
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    const int n = (k + 1) % 4;
    total += swept_angle(field, xs[k], ys[k], angles[k], xs[n], ys[n], angles[n], 0);
  }
  return static_cast<int>(std::lround(total / (2 * kPi)));
}

}  // namespace

DetectionDiagnostics& DetectionDiagnostics::operator+=(const DetectionDiagnostics& o) {
  cells += o.cells;
  candidate_cells += o.candidate_cells;
  winding_cells += o.winding_cells;
  winding_mismatches += o.winding_mismatches;
  newton_starts += o.newton_starts;
  newton_failures += o.newton_failures;
  rejected_residual += o.rejected_residual;
  return *this;
}

int winding_number(std::span<const std::array<double, 2>, 4> corner_values) {
  double total = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& a = corner_values[k];
    const auto& b = corner_values[(k + 1) % 4];
    double d = std::atan2(b[1], b[0]) - std::atan2(a[1], a[0]);
    if (d > kPi) d -= 2 * kPi;
    if (d <= -kPi) d += 2 * kPi;
    total += d;
  }
  return static_cast<int>(std::lround(total / (2 * kPi)));
}

DetectionResult detect(const PlanarField& field, const SingularityKind& kind, const Box& box,
                       const DetectionOptions& options) {
  if (!(box.x1 > box.x0 && box.y1 > box.y0)) throw ContractViolation("detect: empty box");
  if (!(options.spacing > 0.0)) throw ContractViolation("detect: spacing must be positive");
  if (!field.at) throw ContractViolation("detect: field has no point evaluator");

  const auto nx = static_cast<std::size_t>(std::ceil((box.x1 - box.x0) / options.spacing));
  const auto ny = static_cast<std::size_t>(std::ceil((box.y1 - box.y0) / options.spacing));
  const double hx = (box.x1 - box.x0) / static_cast<double>(nx);
  const double hy = (box.y1 - box.y0) / static_cast<double>(ny);
  std::vector<double> xs(nx + 1), ys(ny + 1);
  for (std::size_t i = 0; i <= nx; ++i) xs[i] = box.x0 + hx * static_cast<double>(i);
  for (std::size_t j = 0; j <= ny; ++j) ys[j] = box.y0 + hy * static_cast<double>(j);
  xs[nx] = box.x1;
  ys[ny] = box.y1;

  std::array<Eigen::MatrixXd, 2> grid;
  if (field.grid) {
    field.grid(xs, ys, grid);
  } else {
    for (auto& g : grid) g.resize(static_cast<Eigen::Index>(nx + 1), static_cast<Eigen::Index>(ny + 1));
    for (std::size_t i = 0; i <= nx; ++i)
      for (std::size_t j = 0; j <= ny; ++j) {
        const VectorSample s = field.at(xs[i], ys[j]);
        grid[0](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.v[0];
        grid[1](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.v[1];
      }
  }

  DetectionResult result;
  DetectionDiagnostics& diag = result.diagnostics;
  diag.cells = nx * ny;
  const double h = std::max(hx, hy);
  // A zero line can bow into a cell without changing sign at its corners;
  // the margin admits cells whose corner values come within half a cell's
  // worth of typical gradient of zero.
  const double margin = 0.5 * h * field.jacobian_scale;
  const double step_tol = 1e-12 * h;
  const double residual_limit = options.residual_tol * field.jacobian_scale;

  using Cell = std::pair<std::size_t, std::size_t>;
  std::map<Cell, int> cell_winding;
  std::vector<Cell> candidates;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
      const std::array<std::array<double, 2>, 4> corners = {{{grid[0](I, J), grid[1](I, J)},
                                                             {grid[0](I + 1, J), grid[1](I + 1, J)},
                                                             {grid[0](I + 1, J + 1), grid[1](I + 1, J + 1)},
                                                             {grid[0](I, J + 1), grid[1](I, J + 1)}}};
      const int w = winding_number(corners);
      bool candidate = w != 0;
      if (!candidate) {
        candidate = true;
        for (int c = 0; c < 2 && candidate; ++c) {
          double lo = corners[0][c], hi = corners[0][c];
          for (const auto& v : corners) {
            lo = std::min(lo, v[c]);
            hi = std::max(hi, v[c]);
          }
          candidate = lo <= margin && hi >= -margin;
        }
      }
      if (w != 0) cell_winding[{i, j}] = w;
      if (candidate) candidates.push_back({i, j});
    }
  diag.winding_cells = cell_winding.size();
  diag.candidate_cells = candidates.size();

  auto cell_box = [&](const Cell& c) { return Box{xs[c.first], ys[c.second], xs[c.first + 1], ys[c.second + 1]}; };
  std::vector<Singularity> found;
  auto search = [&](const Cell& c, double fx, double fy) {
    const Box cell = cell_box(c);
    ++diag.newton_starts;
    const NewtonOutcome n = newton(field, cell.x0 + fx * hx, cell.y0 + fy * hy, step_tol, options.max_newton, 4 * h);
    if (!n.converged) {
      ++diag.newton_failures;
      return;
    }
    if (!cell.contains(n.x, n.y)) return;
    const double residual = std::hypot(n.sample.v[0], n.sample.v[1]);
    if (!(residual <= residual_limit)) {
      ++diag.rejected_residual;
      return;
    }
    found.push_back({n.x, n.y, kind, sign_of_det(n.sample), residual});
  };
  for (const Cell& c : candidates) search(c, 0.5, 0.5);

  auto charges_by_cell = [&] {
    std::map<Cell, int> out;
    for (const auto& s : found) {
      auto i = std::min(static_cast<std::size_t>((s.x - box.x0) / hx), nx - 1);
      auto j = std::min(static_cast<std::size_t>((s.y - box.y0) / hy), ny - 1);
      out[{i, j}] += s.charge;
    }
    return out;
  };
  auto suspicious = [&](const std::map<Cell, int>& charges, const std::map<Cell, int>& windings) {
    std::vector<Cell> out;
    for (const auto& [cell, w] : windings) {
      auto it = charges.find(cell);
      if ((it == charges.end() ? 0 : it->second) != w) out.push_back(cell);
    }
    for (const auto& [cell, q] : charges)
      if (q != 0 && !windings.contains(cell)) out.push_back(cell);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };

  merge_duplicates(found, options.merge_radius);
  auto charges = charges_by_cell();
  // Corner windings miss rotations of more than pi between neighbouring
  // corners; cells whose winding disagrees with the charges found are
  // recounted along adaptively sampled edges and searched from more starts.
  // A disagreement in one cell often means the partner of a close pair sits
  // in a neighbour, so neighbours are searched and recounted as well.
  std::vector<Cell> retry;
  for (const Cell& c : suspicious(charges, cell_winding))
    for (std::size_t i = c.first > 0 ? c.first - 1 : 0; i <= std::min(c.first + 1, nx - 1); ++i)
      for (std::size_t j = c.second > 0 ? c.second - 1 : 0; j <= std::min(c.second + 1, ny - 1); ++j)
        retry.push_back({i, j});
  std::sort(retry.begin(), retry.end());
  retry.erase(std::unique(retry.begin(), retry.end()), retry.end());
  for (const Cell& c : retry) {
    const int w = edge_winding(field, cell_box(c));
    if (w != 0)
      cell_winding[c] = w;
    else
      cell_winding.erase(c);
    for (double fx : {0.125, 0.375, 0.625, 0.875})
      for (double fy : {0.125, 0.375, 0.625, 0.875}) search(c, fx, fy);
  }
  if (!retry.empty()) {
    merge_duplicates(found, options.merge_radius);
    charges = charges_by_cell();
  }
  diag.winding_mismatches = suspicious(charges, cell_winding).size();
  result.singularities = std::move(found);
  return result;
}

double default_spacing(const SingularityKind& kind, const CorrelationModel& model) {
  return std::sqrt(kCellOccupancy / density(kind, model));
}

DetectionResult detect(const FieldRealization& field, const CorrelationModel& model) {
  if (field.model != model.kind()) throw ContractViolation("detect: realization was drawn from another model");
  PlanarField planar;
  planar.at = [&field](double x, double y) { return defining_vector(field, x, y); };
  planar.grid = [&field](std::span<const double> xs, std::span<const double> ys,
                         std::array<Eigen::MatrixXd, 2>& out) { defining_vector_grid(field, xs, ys, out); };
  planar.jacobian_scale = jacobian_scale(field.kind, model);
  DetectionOptions options;
  options.spacing = default_spacing(field.kind, model);
  return detect(planar, field.kind, Box{0.0, 0.0, field.side, field.side}, options);
}

}  // namespace topocorr
