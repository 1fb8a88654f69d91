#pragma once

// Closed-form densities, h functions and charge correlations, plus the
// screening sum rules built on them.
//
// Every kind shares the form g(r) = (n-1)! / ((2 pi)^n d^2 r^(n-1)) h'(r),
// with h(0) = (2 pi)^n d / ((n-1)! sigma_(n-1)) and h(inf) = 0, so the total
// screening charge is exactly -1.

#include <cstdint>
#include <functional>
#include <vector>

#include "topocorr/correlation_model.hpp"
#include "topocorr/kinds.hpp"

namespace topocorr {

/// Surface area of the unit sphere in n dimensions (2 pi^(n/2) / Gamma(n/2)).
double sphere_area(int n);

/// Mean |det| of an n x n matrix of standard normals is (2 pi)^(n/2) times
/// this; equals Gamma((n+1)/2) / pi^((n+1)/2).
double hypervolume_constant(int n);
double mean_abs_det_target(int n);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};
MonteCarloEstimate mean_abs_det_oracle(int n, std::size_t samples, std::uint64_t seed);

double density(const SingularityKind& kind, const CorrelationModel& model);

/// h(0) from the Taylor coefficients of C.
double h_at_origin(const SingularityKind& kind, const CorrelationModel& model);

struct HValue {
  double h = 0.0;
  double dh = 0.0;  // dh/dr
};
/// h and its exact radial derivative. At r = 0 returns the limit with dh = 0.
HValue h_with_derivative(const SingularityKind& kind, const CorrelationModel& model, double r);
double h_function(const SingularityKind& kind, const CorrelationModel& model, double r);

/// Throws DomainError at r <= 0.
double g_analytic(const SingularityKind& kind, const CorrelationModel& model, double r);

/// (n-1)! sigma_(n-1) / ((2 pi)^n d): converts h differences to charge.
double charge_prefactor(const SingularityKind& kind, const CorrelationModel& model);

/// Q(R) = d * integral of g over the ball of radius R, from h(R) - h(0).
double cumulative_charge(const SingularityKind& kind, const CorrelationModel& model, double R);

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  double cutoff = 0.0;
  bool converged = false;
};

/// d * sigma_(n-1) * integral_0^cutoff g(s) s^(n-1) ds. The integral is
/// split at sign changes of the integrand; when it oscillates, the partial
/// sums at successive zeros are averaged repeatedly (Euler transform) to
/// estimate the infinite-range limit.
QuadratureResult screening_quadrature(const std::function<double(double)>& g, int n, double d,
                                      double cutoff);

struct ScreeningReport {
  double closed_form = 0.0;
  QuadratureResult quadrature;
};
ScreeningReport screening_integral(const SingularityKind& kind, const CorrelationModel& model,
                                   double cutoff = 200.0);

enum class MomentVerdict { Converged, LogDivergent, Undetermined };
const char* to_string(MomentVerdict v);

struct SecondMomentPoint {
  double R = 0.0;
  double partial = 0.0;   // d sigma integral_0^R g s^(n+1) ds
  double smoothed = 0.0;  // two passes of a 2 pi moving average ending at R
};

struct SumRuleReport {
  double first_moment_closed = 0.0;
  QuadratureResult first_moment_quadrature;
  std::vector<SecondMomentPoint> second_moment;  // log-spaced cutoffs in [R_max/8, R_max]
  double fit_a = 0.0;  // smoothed ~ a + b ln R over the cutoffs
  double fit_b = 0.0;
  double fit_b_stderr = 0.0;
  // (S(R) - S(R/2)) / (S(R/2) - S(R/4)) on the smoothed partials: below 1
  // for a convergent tail, near 1 for a logarithm, near 2 for linear growth.
  double doubling_ratio = 0.0;
  MomentVerdict verdict = MomentVerdict::Undetermined;
  double converged_value = 0.0;  // geometric extrapolation when Converged
};

/// Requires R_max >= 50.
SumRuleReport second_moment(const SingularityKind& kind, const CorrelationModel& model, double R_max);

struct EnvelopeFit {
  double exponent = 0.0;  // |h| envelope ~ r^exponent
  double exponent_stderr = 0.0;
  std::size_t peaks = 0;
};
/// Fits log of the local maxima of |h| against log r on [r_lo, r_hi].
EnvelopeFit h_envelope(const SingularityKind& kind, const CorrelationModel& model, double r_lo,
                       double r_hi);

}  // namespace topocorr
