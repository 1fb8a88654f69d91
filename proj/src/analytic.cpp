#include "topocorr/analytic.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "topocorr/errors.hpp"

namespace topocorr {

namespace {

constexpr double kPi = std::numbers::pi;

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

using Jet = Taylor<3>;
using Jet2 = Taylor<2>;

// h as a two-term jet (value, derivative).
Jet2 h_jet(const SingularityKind& kind, const CorrelationModel& model, double r) {
  const CorrelationJets c = correlation_jets(model, r);
  const Jet x = Jet::variable(r);
  const auto& z = c.zero;
  switch (kind.tag) {
    case KindTag::VectorZero: {
      // h_n = (-C' / sqrt(1 - C^2))^n
      const Jet base = c.E / sqrt(c.one_minus_c * (1.0 + c.C));
      return pow(base, kind.n).truncate<2>();
    }
    case KindTag::Critical2D: {
      // h_c = (1 / (r X)) d/dr [X^3 / sqrt((F0^2 - F^2)(F0^2 - H^2))], X = H - F
      // Expanded as X (3 X' den - X den') / (r den^2) so that nothing divides
      // by X, which underflows at large r for rapidly decaying C.
      const Jet& X = c.h_minus_f;
      const Jet den = sqrt(c.f0_minus_f * (z.F0 + c.F) * c.f0_minus_h * (z.F0 + c.H));
      const Jet2 X2 = X.truncate<2>();
      const Jet2 den2 = den.truncate<2>();
      return X2 * (3.0 * X.differentiate() * den2 - X2 * den.differentiate()) /
             (x.truncate<2>() * den2 * den2);
    }
    case KindTag::Umbilic2D: {
      // h_u = d/dr [r (Q - R)^2 / (4 sqrt(det K_u))] + Q (P + R - 2Q) / (4 sqrt(det K_u))
      const Jet root = sqrt(c.l0_minus_w * (z.L0 + c.W) * c.l0_minus_l * (z.L0 + c.L));
      const Jet A = x * c.q_minus_r * c.q_minus_r / (4.0 * root);
      const Jet B = c.Q * (c.P + c.R - 2.0 * c.Q) / (4.0 * root);
      return A.differentiate() + B.truncate<2>();
    }
  }
  return Jet2(0.0);
}

void check_positive_density(double d, const SingularityKind& kind) {
  if (!(d > 0.0) || !std::isfinite(d))
    throw DomainError("density of " + kind.label() + " is not positive for this correlation model");
}

double integrate_panel(const std::function<double(double)>& f, double a, double b, double* err) {
  double e = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, 1e-13, &e);
  if (err) *err += e;
  return v;
}

}  // namespace

double sphere_area(int n) {
  if (n < 1) throw ContractViolation("sphere_area: n must be >= 1");
  return 2.0 * std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n);
}

double hypervolume_constant(int n) {
  if (n < 1) throw ContractViolation("hypervolume_constant: n must be >= 1");
  return std::tgamma(0.5 * (n + 1)) / std::pow(kPi, 0.5 * (n + 1));
}

double mean_abs_det_target(int n) { return std::pow(2.0 * kPi, 0.5 * n) * hypervolume_constant(n); }

MonteCarloEstimate mean_abs_det_oracle(int n, std::size_t samples, std::uint64_t seed) {
  if (n < 1) throw ContractViolation("mean_abs_det_oracle: n must be >= 1");
  if (samples < 2) throw ContractViolation("mean_abs_det_oracle: need at least two samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(n, n);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = normal(rng);
    const double v = std::abs(g.determinant());
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / samples;
  const double var = (sum_sq - samples * mean * mean) / (samples - 1);
  return {mean, std::sqrt(var / samples)};
}

double density(const SingularityKind& kind, const CorrelationModel& model) {
  if (model.max_order() < kind.required_order())
    throw ContractViolation(kind.label() + " needs derivatives of C up to order " +
                            std::to_string(kind.required_order()) + "; model '" + model.name() +
                            "' provides " + std::to_string(model.max_order()));
  double d = 0.0;
  switch (kind.tag) {
    case KindTag::VectorZero: {
      const int n = kind.n;
      d = std::pow(-model.at_origin(2), 0.5 * n) * factorial(n - 1) * sphere_area(n) /
          std::pow(2.0 * kPi, n);
      break;
    }
    case KindTag::Critical2D:
      d = std::abs(2.0 * model.at_origin(4) / (3.0 * kPi * std::sqrt(3.0) * model.at_origin(2)));
      break;
    case KindTag::Umbilic2D:
      d = std::abs(3.0 * model.at_origin(6) / (10.0 * kPi * model.at_origin(4)));
      break;
  }
  check_positive_density(d, kind);
  return d;
}

double h_at_origin(const SingularityKind& kind, const CorrelationModel& model) {
  const CoincidentValues z = coincident_values(model);
  switch (kind.tag) {
    case KindTag::VectorZero: return std::pow(z.F0, 0.5 * kind.n);
    case KindTag::Critical2D: return 4.0 * z.M0 / (3.0 * std::sqrt(3.0) * z.F0);
    case KindTag::Umbilic2D: return 3.0 * z.S0 / (5.0 * z.M0);
  }
  return 0.0;
}

HValue h_with_derivative(const SingularityKind& kind, const CorrelationModel& model, double r) {
  if (!(r >= 0.0)) throw ContractViolation("h_function: r must be >= 0");
  if (r == 0.0) return {h_at_origin(kind, model), 0.0};
  const Jet2 h = h_jet(kind, model, r);
  return {h.value(), h.derivative(1)};
}

double h_function(const SingularityKind& kind, const CorrelationModel& model, double r) {
  return h_with_derivative(kind, model, r).h;
}

double charge_prefactor(const SingularityKind& kind, const CorrelationModel& model) {
  const int n = kind.n;
  return factorial(n - 1) * sphere_area(n) / (std::pow(2.0 * kPi, n) * density(kind, model));
}

double g_analytic(const SingularityKind& kind, const CorrelationModel& model, double r) {
  if (!(r > 0.0)) throw DomainError("g is not defined at coincidence (r = 0)");
  const int n = kind.n;
  const double d = density(kind, model);
  const double dh = h_with_derivative(kind, model, r).dh;
  return factorial(n - 1) / (std::pow(2.0 * kPi, n) * d * d * std::pow(r, n - 1)) * dh;
}

double cumulative_charge(const SingularityKind& kind, const CorrelationModel& model, double R) {
  if (!(R >= 0.0)) throw ContractViolation("cumulative_charge: R must be >= 0");
  return charge_prefactor(kind, model) * (h_function(kind, model, R) - h_at_origin(kind, model));
}

QuadratureResult screening_quadrature(const std::function<double(double)>& g, int n, double d,
                                      double cutoff) {
  if (!(cutoff > 0.0)) throw ContractViolation("screening_quadrature: cutoff must be positive");
  const double sigma = sphere_area(n);
  std::function<double(double)> phi = [&](double s) {
    return d * sigma * g(s) * std::pow(s, n - 1);
  };

  // Break points at sign changes of the integrand.
  const double step = 0.05;
  std::vector<double> breaks{0.0};
  double prev_s = step * 1e-3;
  double prev_v = phi(prev_s);
  for (double s = step; s <= cutoff + 1e-12; s += step) {
    const double v = phi(s);
    if (prev_v * v < 0.0) {
      auto tol = boost::math::tools::eps_tolerance<double>(45);
      std::uintmax_t iters = 100;
      auto [lo, hi] = boost::math::tools::toms748_solve(phi, prev_s, s, prev_v, v, tol, iters);
      breaks.push_back(0.5 * (lo + hi));
    }
    prev_s = s;
    prev_v = v;
  }

  QuadratureResult out;
  out.cutoff = cutoff;
  double quad_err = 0.0;
  std::vector<double> partial;
  double total = 0.0;
  for (std::size_t k = 1; k < breaks.size(); ++k) {
    total += integrate_panel(phi, breaks[k - 1], breaks[k], &quad_err);
    partial.push_back(total);
  }
  const double last = breaks.back();
  double tail = 0.0;
  if (cutoff > last) tail = integrate_panel(phi, last, cutoff, &quad_err);

  constexpr std::size_t kEulerTerms = 12;
  if (partial.size() >= kEulerTerms + 4) {
    // Oscillating integrand: the partial sums at successive zeros bracket the
    // limit; repeated averaging of neighbours accelerates them.
    std::vector<double> level(partial.end() - kEulerTerms, partial.end());
    double previous = level.back();
    while (level.size() > 1) {
      previous = level.back();
      for (std::size_t i = 0; i + 1 < level.size(); ++i) level[i] = 0.5 * (level[i] + level[i + 1]);
      level.pop_back();
    }
    out.value = level.front();
    out.error_estimate = std::abs(out.value - previous) + quad_err;
  } else {
    out.value = total + tail;
    out.error_estimate = quad_err + std::abs(phi(cutoff)) * step;
  }
  out.converged = std::isfinite(out.value) && out.error_estimate < 1e-2;
  return out;
}

ScreeningReport screening_integral(const SingularityKind& kind, const CorrelationModel& model,
                                   double cutoff) {
  ScreeningReport rep;
  // h(inf) = 0, so the closed form is -prefactor * h(0) = -1 identically.
  rep.closed_form = -charge_prefactor(kind, model) * h_at_origin(kind, model);
  auto g = [&](double s) { return g_analytic(kind, model, s); };
  rep.quadrature = screening_quadrature(g, kind.n, density(kind, model), cutoff);
  return rep;
}

const char* to_string(MomentVerdict v) {
  switch (v) {
    case MomentVerdict::Converged: return "Converged";
    case MomentVerdict::LogDivergent: return "LogDivergent";
    case MomentVerdict::Undetermined: return "Undetermined";
  }
  return "?";
}

SumRuleReport second_moment(const SingularityKind& kind, const CorrelationModel& model, double R_max) {
  if (!(R_max >= 50.0)) throw ContractViolation("second_moment: R_max must be at least 50");
  SumRuleReport rep;
  const auto first = screening_integral(kind, model);
  rep.first_moment_closed = first.closed_form;
  rep.first_moment_quadrature = first.quadrature;

  // d sigma g s^(n-1) = prefactor * h'(s), so the second-moment integrand is
  // prefactor * h'(s) * s^2.
  const double pref = charge_prefactor(kind, model);
  auto f = [&](double s) { return pref * h_with_derivative(kind, model, s).dh * s * s; };

  const double dx = kPi / 16.0;
  const std::size_t per_window = 32;  // 2 pi / dx
  const std::size_t panels = static_cast<std::size_t>(std::ceil(R_max / dx));
  std::vector<double> grid(panels + 1), cum(panels + 1, 0.0);
  for (std::size_t k = 0; k <= panels; ++k) grid[k] = k * dx;
  for (std::size_t k = 1; k <= panels; ++k) {
    cum[k] = cum[k - 1] +
             boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, grid[k - 1], grid[k], 0);
  }
  // Two passes of a 2 pi boxcar. The partial integrals oscillate with
  // integer wavenumbers whose amplitude drifts slowly; one pass leaves
  // ripples of a few percent, two leave a smooth trend.
  auto boxcar = [&](const std::vector<double>& v) {
    std::vector<double> out(v.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = per_window; k < v.size(); ++k) {
      double s = 0.5 * (v[k - per_window] + v[k]);
      for (std::size_t j = k - per_window + 1; j < k; ++j) s += v[j];
      out[k] = s / per_window;
    }
    return out;
  };
  std::vector<double> once = boxcar(cum);
  std::vector<double> twice = boxcar(once);

  // Cutoffs R_max/8 .. R_max, ten per doubling.
  constexpr int kPerDoubling = 10;
  constexpr int kCutoffs = 3 * kPerDoubling + 1;
  const double lo = R_max / 8.0;
  std::vector<double> xs, ys;
  for (int i = 0; i < kCutoffs; ++i) {
    const double R = lo * std::pow(2.0, static_cast<double>(i) / kPerDoubling);
    std::size_t k = std::min(panels, static_cast<std::size_t>(std::llround(R / dx)));
    k = std::max(k, 2 * per_window);
    SecondMomentPoint pt{grid[k], cum[k], twice[k]};
    rep.second_moment.push_back(pt);
    xs.push_back(std::log(pt.R));
    ys.push_back(pt.smoothed);
  }

  // Least squares smoothed = a + b ln R.
  const double count = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= count;
  my /= count;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  rep.fit_b = sxy / sxx;
  rep.fit_a = my - rep.fit_b * mx;
  double ssr = 0, scale = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double res = ys[i] - rep.fit_a - rep.fit_b * xs[i];
    ssr += res * res;
    scale = std::max(scale, std::abs(ys[i]));
  }
  rep.fit_b_stderr = std::sqrt(ssr / (count - 2.0) / sxx);

  // Increments over successive doublings of R. A convergent tail in powers
  // of 1/R shrinks them geometrically; a logarithm keeps them constant and
  // faster growth enlarges them.
  const double s0 = ys[0], s1 = ys[kPerDoubling], s2 = ys[2 * kPerDoubling], s3 = ys[3 * kPerDoubling];
  const double d1 = s1 - s0, d2 = s2 - s1, d3 = s3 - s2;
  const double negligible = 1e-12 * std::max(scale, 1e-300);
  rep.converged_value = s3;
  if (std::abs(d2) <= negligible && std::abs(d3) <= negligible) {
    rep.doubling_ratio = 0.0;
    rep.verdict = MomentVerdict::Converged;
    return rep;
  }
  rep.doubling_ratio = d3 / d2;
  const double earlier_ratio = std::abs(d1) > negligible ? d2 / d1 : 0.0;
  constexpr double kGeometric = 0.8;
  if (std::abs(rep.doubling_ratio) < kGeometric && std::abs(earlier_ratio) < kGeometric) {
    rep.verdict = MomentVerdict::Converged;
    const double q = rep.doubling_ratio;
    rep.converged_value = s3 + d3 * q / (1.0 - q);
  } else if (rep.doubling_ratio >= kGeometric && std::abs(rep.fit_b) >= 5.0 * rep.fit_b_stderr) {
    rep.verdict = MomentVerdict::LogDivergent;
  } else {
    rep.verdict = MomentVerdict::Undetermined;
  }
  return rep;
}

EnvelopeFit h_envelope(const SingularityKind& kind, const CorrelationModel& model, double r_lo,
                       double r_hi) {
  if (!(r_lo > 0.0 && r_hi > r_lo)) throw ContractViolation("h_envelope: need 0 < r_lo < r_hi");
  const double step = 0.01;
  std::vector<double> xs, ys;
  double a = std::abs(h_function(kind, model, r_lo));
  double b = std::abs(h_function(kind, model, r_lo + step));
  for (double r = r_lo + 2 * step; r <= r_hi; r += step) {
    const double c = std::abs(h_function(kind, model, r));
    if (b > a && b >= c) {
      // Parabola through the three samples.
      const double denom = a - 2 * b + c;
      const double peak = denom != 0.0 ? b - 0.125 * (a - c) * (a - c) / denom : b;
      const double offset = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
      xs.push_back(std::log(r - step + offset * step));
      ys.push_back(std::log(peak));
    }
    a = b;
    b = c;
  }
  EnvelopeFit fit;
  fit.peaks = xs.size();
  if (xs.size() < 3) throw NumericalFailure("h_envelope", "fewer than three envelope peaks found");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  fit.exponent = sxy / sxx;
  double ssr = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double res = ys[i] - my - fit.exponent * (xs[i] - mx);
    ssr += res * res;
  }
  fit.exponent_stderr = std::sqrt(ssr / (n - 2.0) / sxx);
  return fit;
}

}  // namespace topocorr
