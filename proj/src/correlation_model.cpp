#include "topocorr/correlation_model.hpp"

#include <boost/math/special_functions/bessel.hpp>

#include <cmath>
#include <limits>
#include <utility>

#include "topocorr/errors.hpp"

namespace topocorr {

namespace {

constexpr int kBuiltinMaxOrder = 10;
constexpr int kBuiltinTaylorTerms = 40;
// Ratio formulas lose about k*log10(1/r) digits for the k-th order
// combinations; with exact Taylor coefficients the series is cheaper and
// more accurate below this.
constexpr double kBuiltinSeriesSwitch = 0.5;

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

// J0^(k)(r) = 2^-k sum_j (-1)^j C(k,j) J_{2j-k}(r)
double bessel_j0_derivative(int k, double r) {
  double sum = 0.0;
  for (int j = 0; j <= k; ++j) {
    int nu = 2 * j - k;
    double jn = boost::math::cyl_bessel_j(std::abs(nu), r);
    if (nu < 0 && (-nu) % 2 == 1) jn = -jn;
    sum += ((j % 2) ? -1.0 : 1.0) * binomial(k, j) * jn;
  }
  return std::ldexp(sum, -k);
}

// d^k/dr^k exp(-r^2/2) = (-1)^k He_k(r) exp(-r^2/2)
double gaussian_derivative(int k, double r) {
  double he_prev = 1.0;
  double he = r;
  if (k == 0) return std::exp(-0.5 * r * r);
  for (int n = 1; n < k; ++n) {
    double next = r * he - n * he_prev;
    he_prev = he;
    he = next;
  }
  double sign = (k % 2) ? -1.0 : 1.0;
  return sign * he * std::exp(-0.5 * r * r);
}

}  // namespace

CorrelationModel CorrelationModel::ring() {
  CorrelationModel m;
  m.kind_ = ModelKind::Ring2D;
  m.name_ = "ring";
  m.max_order_ = kBuiltinMaxOrder;
  m.fn_ = bessel_j0_derivative;
  m.series_switch_ = kBuiltinSeriesSwitch;
  // J0(r) = sum (-1)^k (r/2)^(2k) / (k!)^2
  m.taylor_.resize(kBuiltinTaylorTerms);
  m.taylor_[0] = 1.0;
  for (int k = 1; k < kBuiltinTaylorTerms; ++k)
    m.taylor_[k] = -m.taylor_[k - 1] / (4.0 * k * k);
  return m;
}

CorrelationModel CorrelationModel::gaussian() {
  CorrelationModel m;
  m.kind_ = ModelKind::GaussianC;
  m.name_ = "gauss";
  m.max_order_ = kBuiltinMaxOrder;
  m.fn_ = gaussian_derivative;
  m.series_switch_ = kBuiltinSeriesSwitch;
  m.taylor_.resize(kBuiltinTaylorTerms);
  m.taylor_[0] = 1.0;
  for (int k = 1; k < kBuiltinTaylorTerms; ++k) m.taylor_[k] = -m.taylor_[k - 1] / (2.0 * k);
  return m;
}

CorrelationModel CorrelationModel::custom(std::string name, DerivativeFn fn, int max_order,
                                          std::vector<double> even_derivatives_at_zero,
                                          double series_switch) {
  if (!fn) throw ContractViolation("custom correlation model needs a derivative evaluator");
  if (max_order < 0) throw ContractViolation("custom correlation model: negative max_order");
  if (even_derivatives_at_zero.size() < 5)
    throw ContractViolation(
        "custom correlation model needs C^(2k)(0) for orders 0, 2, 4, 6 and 8");
  if (std::abs(even_derivatives_at_zero[0] - 1.0) > 1e-12)
    throw ContractViolation("custom correlation model must satisfy C(0) = 1");
  if (!(series_switch >= 0.0)) throw ContractViolation("series switch must be non-negative");
  CorrelationModel m;
  m.kind_ = ModelKind::Custom;
  m.name_ = std::move(name);
  m.max_order_ = max_order;
  m.fn_ = std::move(fn);
  m.series_switch_ = series_switch;
  m.taylor_.resize(even_derivatives_at_zero.size());
  for (std::size_t k = 0; k < even_derivatives_at_zero.size(); ++k)
    m.taylor_[k] = even_derivatives_at_zero[k] / factorial(static_cast<int>(2 * k));
  return m;
}

double CorrelationModel::derivative(int order, double r) const {
  if (order < 0 || order > max_order_)
    throw ContractViolation("correlation model '" + name_ + "' does not provide derivative order " +
                            std::to_string(order));
  if (!(r >= 0.0)) throw ContractViolation("correlation model evaluated at negative r");
  return fn_(order, r);
}

double CorrelationModel::at_origin(int order) const {
  if (order < 0) throw ContractViolation("negative derivative order");
  if (order % 2) return 0.0;
  std::size_t k = static_cast<std::size_t>(order / 2);
  if (k >= taylor_.size())
    throw ContractViolation("correlation model '" + name_ + "' lacks the Taylor coefficient of order " +
                            std::to_string(order));
  return taylor_[k] * factorial(order);
}

DerivativeStack eval_derivatives(const CorrelationModel& model, double r, int order) {
  if (!(r >= 0.0)) throw ContractViolation("eval_derivatives: r must be >= 0");
  if (order < 0 || order > 6) throw ContractViolation("eval_derivatives: order must be in 0..6");
  DerivativeStack s;
  s.r = r;
  for (int j = 0; j <= order; ++j) s.c[j] = (r == 0.0) ? model.at_origin(j) : model.derivative(j, r);
  return s;
}

CoincidentValues coincident_values(const CorrelationModel& model) {
  CoincidentValues z;
  z.F0 = -model.at_origin(2);
  z.M0 = model.at_origin(4);
  z.L0 = z.M0 / 3.0;
  z.S0 = -model.at_origin(6);
  z.T0 = z.S0 / 5.0;
  return z;
}

namespace {

template <class Real>
void fill_combinations(DerivedCorrelationsT<Real>& d) {
  d.W = (d.M + d.N - 2.0 * d.L) / 4.0;
  d.X = (d.P - d.Q) / 2.0;
  d.Y = (d.Q - d.R) / 2.0;
}

// c[j] holds C^(j)(r) for j = 0..6 and `x` is r (a jet when Real is one).
template <class Real>
DerivedCorrelationsT<Real> ratio_route(const std::array<Real, 7>& c, const Real& x,
                                       const CoincidentValues& zero) {
  DerivedCorrelationsT<Real> d;
  d.r = value_of(x);
  d.zero = zero;
  const Real x2 = x * x;
  const Real x3 = x2 * x;
  const Real x4 = x3 * x;
  const Real x5 = x4 * x;

  d.C = c[0];
  d.E = -c[1];
  d.F = -c[2];
  d.H = -c[1] / x;

  d.G = c[3];
  d.I = (x * c[2] - c[1]) / x2;
  d.L = (x2 * c[3] - 2.0 * x * c[2] + 2.0 * c[1]) / x3;
  d.M = c[4];
  d.N = 3.0 * (x * c[2] - c[1]) / x3;

  d.P = -c[5];
  d.Q = -(x3 * c[4] - 3.0 * x2 * c[3] + 6.0 * x * c[2] - 6.0 * c[1]) / x4;
  d.R = -3.0 * (x2 * c[3] - 3.0 * x * c[2] + 3.0 * c[1]) / x4;
  d.S = -c[6];
  d.T = -(x4 * c[5] - 4.0 * x3 * c[4] + 12.0 * x2 * c[3] - 24.0 * x * c[2] + 24.0 * c[1]) / x5;
  d.U = -3.0 * (x3 * c[4] - 5.0 * x2 * c[3] + 12.0 * x * c[2] - 12.0 * c[1]) / x5;
  d.V = -15.0 * (x2 * c[3] - 3.0 * x * c[2] + 3.0 * c[1]) / x5;
  fill_combinations(d);

  d.one_minus_c = 1.0 - d.C;
  d.f0_minus_f = zero.F0 - d.F;
  d.f0_minus_h = zero.F0 - d.H;
  d.h_minus_f = d.H - d.F;
  d.l0_minus_l = zero.L0 - d.L;
  d.l0_minus_w = zero.L0 - d.W;
  d.q_minus_r = d.Q - d.R;
  return d;
}

// Radial functions psi_j = (r^-1 d/dr)^j C. With C = sum_k a_k rho^k,
// rho = r^2: psi_j = 2^j sum_{k>=j} a_k k!/(k-j)! rho^(k-j). When
// `drop_constant` is set the rho^0 term is omitted, giving psi_j(r) - psi_j(0)
// without cancellation.
template <class Real>
Real psi_series(std::span<const double> a, int j, const Real& rho, bool drop_constant) {
  const int terms = static_cast<int>(a.size());
  if (j >= terms) return Real(0.0);
  Real acc(0.0);
  const int first = drop_constant ? 1 : 0;
  for (int i = terms - 1 - j; i >= first; --i) {
    const int k = i + j;
    double coef = std::ldexp(a[k], j);
    for (int t = i + 1; t <= k; ++t) coef *= t;  // k!/i!
    acc = acc * rho + Real(coef);
  }
  if (drop_constant) acc = acc * rho;
  return acc;
}

template <class Real>
DerivedCorrelationsT<Real> series_route(const CorrelationModel& model, const Real& x) {
  const CoincidentValues zero = coincident_values(model);
  const auto a = model.taylor();
  const Real rho = x * x;

  std::array<Real, 7> psi;
  std::array<Real, 7> dpsi;
  for (int j = 0; j <= 6; ++j) {
    psi[j] = psi_series(a, j, rho, false);
    dpsi[j] = psi_series(a, j, rho, true);
  }

  // d_x^p d_y^(2s) C at (r, 0)
  //   = (2s-1)!! sum_k p!/(k!(p-2k)! 2^k) r^(p-2k) psi_{s+p-k}
  auto mixed = [&](int p, int s) {
    double dfact = 1.0;
    for (int t = 2 * s - 1; t > 1; t -= 2) dfact *= t;
    Real acc(0.0);
    for (int k = 0; 2 * k <= p; ++k) {
      double coef = factorial(p) / (factorial(k) * factorial(p - 2 * k) * std::ldexp(1.0, k));
      Real pw(1.0);
      for (int t = 0; t < p - 2 * k; ++t) pw = pw * x;
      acc += Real(coef) * pw * psi[s + p - k];
    }
    return Real(dfact) * acc;
  };

  DerivedCorrelationsT<Real> d;
  d.r = value_of(x);
  d.zero = zero;
  d.C = psi[0];
  d.E = -mixed(1, 0);
  d.F = -mixed(2, 0);
  d.H = -mixed(0, 1);
  d.G = mixed(3, 0);
  d.I = mixed(1, 1);
  d.L = mixed(2, 1);
  d.M = mixed(4, 0);
  d.N = mixed(0, 2);
  d.P = -mixed(5, 0);
  d.Q = -mixed(3, 1);
  d.R = -mixed(1, 2);
  d.S = -mixed(6, 0);
  d.T = -mixed(4, 1);
  d.U = -mixed(2, 2);
  d.V = -mixed(0, 3);
  fill_combinations(d);

  const Real x3 = rho * x;
  d.one_minus_c = -dpsi[0];
  d.f0_minus_h = dpsi[1];
  d.h_minus_f = rho * psi[2];
  d.f0_minus_f = dpsi[1] + rho * psi[2];
  d.l0_minus_l = -dpsi[2] - rho * psi[3];
  d.l0_minus_w = -dpsi[2] - rho * psi[3] - rho * rho * psi[4] / 4.0;
  d.q_minus_r = -x3 * psi[4];
  return d;
}

}  // namespace

DerivedCorrelations ratio_correlations(const DerivativeStack& stack, const CoincidentValues& zero) {
  if (!(stack.r > 0.0)) throw DomainError("ratio formulas need r > 0");
  return ratio_route<double>(stack.c, stack.r, zero);
}

DerivedCorrelations series_correlations(const CorrelationModel& model, double r) {
  if (!(r >= 0.0)) throw ContractViolation("series_correlations: r must be >= 0");
  return series_route<double>(model, r);
}

DerivedCorrelations derived_correlations(const CorrelationModel& model, double r) {
  if (!(r >= 0.0)) throw ContractViolation("derived_correlations: r must be >= 0");
  if (r < model.series_switch()) return series_route<double>(model, r);
  return ratio_correlations(eval_derivatives(model, r, std::min(6, model.max_order())),
                            coincident_values(model));
}

CorrelationJets correlation_jets(const CorrelationModel& model, double r) {
  using J = Taylor<3>;
  if (!(r >= 0.0)) throw ContractViolation("correlation_jets: r must be >= 0");
  const J x = J::variable(r);
  if (r < model.series_switch()) return series_route<J>(model, x);

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::array<double, 9> raw;
  for (int k = 0; k <= 8; ++k) raw[k] = (k <= model.max_order()) ? model.derivative(k, r) : nan;
  std::array<J, 7> c;
  for (int k = 0; k <= 6; ++k) c[k] = J::from_derivatives(std::array<double, 3>{raw[k], raw[k + 1], raw[k + 2]});
  return ratio_route<J>(c, x, coincident_values(model));
}

double mixed_partial(const DerivedCorrelations& d, int px, int py) {
  if (px < 0 || py < 0 || px + py > 6)
    throw ContractViolation("mixed_partial: total order must be within 0..6");
  if (py % 2) return 0.0;
  if (d.r == 0.0 && px % 2) return 0.0;
  switch (px * 10 + py) {
    case 0: return d.C;
    case 10: return -d.E;
    case 20: return -d.F;
    case 2: return -d.H;
    case 30: return d.G;
    case 12: return d.I;
    case 40: return d.M;
    case 22: return d.L;
    case 4: return d.N;
    case 50: return -d.P;
    case 32: return -d.Q;
    case 14: return -d.R;
    case 60: return -d.S;
    case 42: return -d.T;
    case 24: return -d.U;
    case 6: return -d.V;
    default: break;
  }
  throw ContractViolation("mixed_partial: unsupported order");
}

double mixed_partial(const DerivedCorrelations& d, std::span<const int> order) {
  if (order.empty()) throw ContractViolation("mixed_partial: empty multi-index");
  // Transverse directions are equivalent: d_y^(2a) d_z^(2b) C equals
  // (2a-1)!!(2b-1)!!/(2a+2b-1)!! times d_y^(2a+2b) C.
  int transverse = 0;
  double factor = 1.0;
  auto dfact = [](int n) {
    double f = 1.0;
    for (int t = n; t > 1; t -= 2) f *= t;
    return f;
  };
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i] < 0) throw ContractViolation("mixed_partial: negative order");
    if (order[i] % 2) return 0.0;
    transverse += order[i];
    factor *= dfact(order[i] - 1);
  }
  factor /= dfact(transverse - 1);
  return factor * mixed_partial(d, order[0], transverse);
}

}  // namespace topocorr
