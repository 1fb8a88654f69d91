#pragma once

// Isotropic field correlation functions C(r) and the two-point correlation
// scalars built from their derivatives.
//
// Units: the ring wavenumber is 1, so lengths are in units of 1/k0.

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "topocorr/taylor.hpp"

namespace topocorr {

enum class ModelKind { Ring2D, GaussianC, Custom };

/// An isotropic correlation function C(r) with C(0) = 1.
///
/// Ring2D is C = J0(r) (all wavevectors on the unit circle); GaussianC is
/// C = exp(-r^2/2). A Custom model supplies a derivative evaluator and the
/// even derivatives of C at the origin through at least order 8. Positivity
/// of a custom power spectrum is the caller's responsibility and is not
/// checked.
class CorrelationModel {
 public:
  using DerivativeFn = std::function<double(int order, double r)>;

  static CorrelationModel ring();
  static CorrelationModel gaussian();
  /// `even_derivatives_at_zero[k]` is C^(2k)(0); at least five values
  /// (orders 0..8) are required and the first must be 1.
  static CorrelationModel custom(std::string name, DerivativeFn fn, int max_order,
                                 std::vector<double> even_derivatives_at_zero,
                                 double series_switch = 1e-2);

  ModelKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  int max_order() const { return max_order_; }

  /// C^(order)(r) for r >= 0. Throws ContractViolation when the model does
  /// not provide that order.
  double derivative(int order, double r) const;

  /// C^(order)(0) from the Taylor coefficients; zero for odd orders.
  double at_origin(int order) const;

  /// Coefficients a_k of C(r) = sum_k a_k r^(2k).
  std::span<const double> taylor() const { return taylor_; }

  /// Separations below this use the Taylor series instead of the ratio
  /// formulas in derived correlations.
  double series_switch() const { return series_switch_; }

 private:
  CorrelationModel() = default;

  ModelKind kind_ = ModelKind::Custom;
  std::string name_;
  int max_order_ = 0;
  DerivativeFn fn_;
  std::vector<double> taylor_;
  double series_switch_ = 1e-2;
};

/// C and its derivatives at one separation: c[j] = C^(j)(r).
struct DerivativeStack {
  double r = 0.0;
  std::array<double, 7> c{};
};

/// Derivatives 0..order at r; entries above `order` are left as zero.
DerivativeStack eval_derivatives(const CorrelationModel& model, double r, int order = 6);

/// Correlation values at coincident points (r = 0). The remaining limits
/// follow from isotropy: E0 = G0 = I0 = P0 = Q0 = R0 = 0, H0 = F0,
/// N0 = M0 = 3 L0, U0 = T0, V0 = S0 = 5 T0.
struct CoincidentValues {
  double F0 = 0.0;  // -C''(0)
  double L0 = 0.0;  // C''''(0)/3
  double M0 = 0.0;  // C''''(0)
  double S0 = 0.0;  // -C^(6)(0)
  double T0 = 0.0;  // S0/5
};

CoincidentValues coincident_values(const CorrelationModel& model);

/// Two-point correlations of f and its derivatives up to third order, for
/// points separated by r along x. Names follow the usual convention:
///   E = -C', F = -C'', H = -C'/r                      (first derivatives)
///   G, I, L, M, N = d_x^3, d_x d_y^2, d_x^2 d_y^2, d_x^4, d_y^4 of C
///   P, Q, R, S, T, U, V = -(d_x^5, d_x^3 d_y^2, d_x d_y^4, d_x^6,
///                          d_x^4 d_y^2, d_x^2 d_y^4, d_y^6) of C
///   W = (M + N - 2L)/4, X = (P - Q)/2, Y = (Q - R)/2.
/// The gap members are differences from coincident values computed without
/// cancellation at small r.
template <class Real>
struct DerivedCorrelationsT {
  double r = 0.0;
  CoincidentValues zero;

  Real C{}, E{}, F{}, H{};
  Real G{}, I{}, L{}, M{}, N{};
  Real P{}, Q{}, R{}, S{}, T{}, U{}, V{};
  Real W{}, X{}, Y{};

  Real one_minus_c{};  // 1 - C
  Real f0_minus_f{};   // F0 - F
  Real f0_minus_h{};   // F0 - H
  Real h_minus_f{};    // H - F = C'' - C'/r
  Real l0_minus_l{};   // L0 - L
  Real l0_minus_w{};   // L0 - W
  Real q_minus_r{};    // Q - R
};

using DerivedCorrelations = DerivedCorrelationsT<double>;
using CorrelationJets = DerivedCorrelationsT<Taylor<3>>;

/// Ratio formulas applied to a derivative stack (r > 0).
DerivedCorrelations ratio_correlations(const DerivativeStack& stack, const CoincidentValues& zero);

/// Every quantity from the Taylor coefficients of C (any r >= 0, accuracy
/// limited by the number of coefficients the model carries).
DerivedCorrelations series_correlations(const CorrelationModel& model, double r);

/// Switches between the two routes at model.series_switch(); r = 0 gives
/// the exact coincident limits.
DerivedCorrelations derived_correlations(const CorrelationModel& model, double r);

/// Same quantities as second-order Taylor jets in r, for exact radial
/// derivatives of expressions built from them. Jet coefficients that would
/// need derivative orders the model lacks are NaN.
CorrelationJets correlation_jets(const CorrelationModel& model, double r);

/// d_x^px d_y^py C evaluated at (r, 0), read off the derived correlations.
/// py odd gives zero; total order at most 6.
double mixed_partial(const DerivedCorrelations& d, int px, int py);

/// The same in any dimension: `order[0]` is along the separation.
double mixed_partial(const DerivedCorrelations& d, std::span<const int> order);

}  // namespace topocorr
