#pragma once

// Isotropic Gaussian random fields as finite sums of plane waves,
//   f(x) = sum_w a_w cos(k_w . x + phi_w),  sum_w a_w^2 = 2 on average,
// with uniform phases and wavevectors drawn to reproduce the power spectrum.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "topocorr/correlation_model.hpp"
#include "topocorr/kinds.hpp"

namespace topocorr {

struct WaveSet {
  std::vector<double> kx, ky, phase, amplitude;

  std::size_t size() const { return kx.size(); }
};

/// One realization in the square window [0, side]^2. Vector zeros use two
/// independent components; critical points and umbilics use one.
struct FieldRealization {
  ModelKind model = ModelKind::Ring2D;
  SingularityKind kind;
  double side = 0.0;
  std::uint64_t seed = 0;
  std::vector<WaveSet> components;
};

/// Directions and radii are stratified: wave i takes the i-th of M equal
/// angular sectors and a randomly permuted one of M equal-probability radial
/// shells, which keeps the sample spectrum close to isotropic.
///
/// Ring2D: |k| = 1, a_w = sqrt(2 / M).
/// GaussianC: E = |k|^2 / 2 is unit exponential for the spectrum of
/// exp(-r^2/2). The defining vector of the kind involves derivatives of order
/// s (0 vector, 1 critical, 2 umbilic), whose variance is weighted by E^s, so
/// with equal amplitudes a few large-|k| waves would carry those statistics
/// and leave an O(1/M) non-Gaussian bias. E is drawn from Gamma(s + 1)
/// instead, with a_w^2 = (2 / M) s! / E^s, which leaves <f(a) f(b)> = C
/// unchanged and gives the order-s derivatives equal weight per wave.
/// For vector zeros s = 0 and amplitudes are sqrt(2 / M).
///
/// Throws ContractViolation for custom models, for vector zeros in n != 2 and
/// for M < 32.
FieldRealization synthesize(const CorrelationModel& model, const SingularityKind& kind, double side,
                            std::size_t waves, std::uint64_t seed);

/// Independent stream seed for realization `index` of a run seeded by `master`.
std::uint64_t realization_seed(std::uint64_t master, std::uint64_t index);

/// f and its partial derivatives to third order at a point.
struct ScalarJet {
  double f = 0, fx = 0, fy = 0;
  double fxx = 0, fxy = 0, fyy = 0;
  double fxxx = 0, fxxy = 0, fxyy = 0, fyyy = 0;
};
ScalarJet evaluate(const WaveSet& waves, double x, double y);

/// Value of the kind's defining 2-vector and its jacobian d v_i / d x_j.
struct VectorSample {
  std::array<double, 2> v{};
  std::array<std::array<double, 2>, 2> jac{};
};
VectorSample defining_vector(const FieldRealization& field, double x, double y);

/// The defining vector on the tensor grid xs x ys; out[c](i, j) = v_c(xs[i], ys[j]).
void defining_vector_grid(const FieldRealization& field, std::span<const double> xs,
                          std::span<const double> ys, std::array<Eigen::MatrixXd, 2>& out);

/// RMS size of one entry of the defining vector's jacobian for this model,
/// the natural scale for residual tolerances.
double jacobian_scale(const SingularityKind& kind, const CorrelationModel& model);

}  // namespace topocorr
