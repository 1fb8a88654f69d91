#include "topocorr/field.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <random>

#include "topocorr/errors.hpp"

namespace topocorr {

namespace {

constexpr double kPi = std::numbers::pi;

int component_count(const SingularityKind& kind) { return kind.tag == KindTag::VectorZero ? 2 : 1; }

int derivative_order(const SingularityKind& kind) {
  switch (kind.tag) {
    case KindTag::VectorZero: return 0;
    case KindTag::Critical2D: return 1;
    case KindTag::Umbilic2D: return 2;
  }
  return 0;
}

// v_c as a sum over waves of w(k) * d^s cos(theta), taken from one field component.
struct GridTerm {
  int component;
  int order;
  double (*weight)(double, double);
};

GridTerm grid_term(const SingularityKind& kind, int c) {
  switch (kind.tag) {
    case KindTag::VectorZero: return {c, 0, [](double, double) { return 1.0; }};
    case KindTag::Critical2D:
      return c == 0 ? GridTerm{0, 1, [](double kx, double) { return kx; }}
                    : GridTerm{0, 1, [](double, double ky) { return ky; }};
    case KindTag::Umbilic2D:
      return c == 0 ? GridTerm{0, 2, [](double kx, double ky) { return 0.5 * (kx * kx - ky * ky); }}
                    : GridTerm{0, 2, [](double kx, double ky) { return kx * ky; }};
  }
  return {0, 0, nullptr};
}

}  // namespace

std::uint64_t realization_seed(std::uint64_t master, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

FieldRealization synthesize(const CorrelationModel& model, const SingularityKind& kind, double side,
                            std::size_t waves, std::uint64_t seed) {
  if (model.kind() == ModelKind::Custom)
    throw ContractViolation("synthesize: only the ring and gauss spectra can be sampled");
  if (kind.tag == KindTag::VectorZero && kind.n != 2)
    throw ContractViolation("synthesize: vector zeros are simulated in two dimensions only");
  if (waves < 32) throw ContractViolation("synthesize: need at least 32 waves");
  if (!(side > 0.0)) throw ContractViolation("synthesize: window side must be positive");

  FieldRealization out;
  out.model = model.kind();
  out.kind = kind;
  out.side = side;
  out.seed = seed;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int s = derivative_order(kind);
  const double m = static_cast<double>(waves);
  double s_factorial = 1.0;
  for (int j = 2; j <= s; ++j) s_factorial *= j;
  for (int c = 0; c < component_count(kind); ++c) {
    WaveSet w;
    w.amplitude.resize(waves);
    w.kx.resize(waves);
    w.ky.resize(waves);
    w.phase.resize(waves);
    std::vector<std::size_t> shell(waves);
    std::iota(shell.begin(), shell.end(), std::size_t{0});
    std::shuffle(shell.begin(), shell.end(), rng);
    for (std::size_t i = 0; i < waves; ++i) {
      const double t = 2.0 * kPi * (static_cast<double>(i) + unit(rng)) / m;
      double k = 1.0, a2 = 2.0 / m;
      if (out.model == ModelKind::GaussianC) {
        const double u = (static_cast<double>(shell[i]) + unit(rng)) / m;
        const double e = s == 0 ? -std::log1p(-u) : boost::math::gamma_p_inv(s + 1.0, u);
        k = std::sqrt(2.0 * e);
        a2 *= s_factorial / std::pow(e, s);
      }
      w.kx[i] = k * std::cos(t);
      w.ky[i] = k * std::sin(t);
      w.amplitude[i] = std::sqrt(a2);
      w.phase[i] = angle(rng);
    }
    out.components.push_back(std::move(w));
  }
  return out;
}

ScalarJet evaluate(const WaveSet& waves, double x, double y) {
  ScalarJet j;
  for (std::size_t i = 0; i < waves.size(); ++i) {
    const double kx = waves.kx[i], ky = waves.ky[i];
    const double t = kx * x + ky * y + waves.phase[i];
    const double a = waves.amplitude[i];
    const double c = a * std::cos(t), s = a * std::sin(t);
    const double kxx = kx * kx, kxy = kx * ky, kyy = ky * ky;
    j.f += c;
    j.fx -= kx * s;
    j.fy -= ky * s;
    j.fxx -= kxx * c;
    j.fxy -= kxy * c;
    j.fyy -= kyy * c;
    j.fxxx += kxx * kx * s;
    j.fxxy += kxx * ky * s;
    j.fxyy += kx * kyy * s;
    j.fyyy += kyy * ky * s;
  }
  return j;
}

VectorSample defining_vector(const FieldRealization& field, double x, double y) {
  VectorSample s;
  switch (field.kind.tag) {
    case KindTag::VectorZero: {
      const ScalarJet a = evaluate(field.components[0], x, y);
      const ScalarJet b = evaluate(field.components[1], x, y);
      s.v = {a.f, b.f};
      s.jac = {{{a.fx, a.fy}, {b.fx, b.fy}}};
      break;
    }
    case KindTag::Critical2D: {
      const ScalarJet a = evaluate(field.components[0], x, y);
      s.v = {a.fx, a.fy};
      s.jac = {{{a.fxx, a.fxy}, {a.fxy, a.fyy}}};
      break;
    }
    case KindTag::Umbilic2D: {
      const ScalarJet a = evaluate(field.components[0], x, y);
      s.v = {0.5 * (a.fxx - a.fyy), a.fxy};
      s.jac = {{{0.5 * (a.fxxx - a.fxyy), 0.5 * (a.fxxy - a.fyyy)}, {a.fxxy, a.fxyy}}};
      break;
    }
  }
  return s;
}

void defining_vector_grid(const FieldRealization& field, std::span<const double> xs,
                          std::span<const double> ys, std::array<Eigen::MatrixXd, 2>& out) {
  const Eigen::Index nx = static_cast<Eigen::Index>(xs.size());
  const Eigen::Index ny = static_cast<Eigen::Index>(ys.size());
  // cos(kx x + ky y + phi + s pi/2) = cos(kx x) cos(ky y + phi') - sin(kx x) sin(ky y + phi')
  Eigen::MatrixXd cx, sx, cy, sy;
  int cached = -1;
  for (int c = 0; c < 2; ++c) {
    const GridTerm term = grid_term(field.kind, c);
    const WaveSet& w = field.components[static_cast<std::size_t>(term.component)];
    const Eigen::Index m = static_cast<Eigen::Index>(w.size());
    if (cached != term.component) {
      cx.resize(nx, m);
      sx.resize(nx, m);
      for (Eigen::Index k = 0; k < m; ++k)
        for (Eigen::Index i = 0; i < nx; ++i) {
          const double t = w.kx[static_cast<std::size_t>(k)] * xs[static_cast<std::size_t>(i)];
          cx(i, k) = std::cos(t);
          sx(i, k) = std::sin(t);
        }
      cached = term.component;
    }
    cy.resize(m, ny);
    sy.resize(m, ny);
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const double a = w.amplitude[kk] * term.weight(w.kx[kk], w.ky[kk]);
      const double shift = w.phase[kk] + 0.5 * kPi * term.order;
      for (Eigen::Index j = 0; j < ny; ++j) {
        const double t = w.ky[kk] * ys[static_cast<std::size_t>(j)] + shift;
        cy(k, j) = a * std::cos(t);
        sy(k, j) = a * std::sin(t);
      }
    }
    out[static_cast<std::size_t>(c)].noalias() = cx * cy;
    out[static_cast<std::size_t>(c)].noalias() -= sx * sy;
  }
}

double jacobian_scale(const SingularityKind& kind, const CorrelationModel& model) {
  const CoincidentValues z = coincident_values(model);
  switch (kind.tag) {
    case KindTag::VectorZero: return std::sqrt(z.F0);
    case KindTag::Critical2D: return std::sqrt((z.M0 + z.L0) / 2.0);
    case KindTag::Umbilic2D: return std::sqrt(z.T0);
  }
  return 1.0;
}

}  // namespace topocorr
