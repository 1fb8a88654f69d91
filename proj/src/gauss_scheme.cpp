#include "topocorr/gauss_scheme.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "topocorr/analytic.hpp"
#include "topocorr/errors.hpp"

namespace topocorr {

namespace {

constexpr double kMinRcond = 1e-15;

Slot make_slot(int point, int component, std::vector<SlotTerm> terms, std::string label) {
  return Slot{point, component, std::move(terms), std::move(label)};
}

SlotTerm term(int ox, int oy, int oz = 0, double coeff = 1.0) { return SlotTerm{coeff, {ox, oy, oz}}; }

const char* point_name(int p) { return p == 0 ? "A" : "B"; }

std::vector<Slot> vector_layout(int n) {
  std::vector<Slot> slots;
  for (int p = 0; p < 2; ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        SlotTerm t;
        t.order[j] = 1;
        slots.push_back(make_slot(p, i, {t},
                                  std::string(point_name(p)) + "_v" + std::to_string(i + 1) + "," +
                                      std::to_string(j + 1)));
      }
  for (int p = 0; p < 2; ++p)
    for (int i = 0; i < n; ++i)
      slots.push_back(make_slot(p, i, {SlotTerm{}}, std::string(point_name(p)) + "_v" + std::to_string(i + 1)));
  return slots;
}

std::vector<Slot> critical_layout() {
  return {
      make_slot(0, 0, {term(2, 0)}, "A_xx"), make_slot(0, 0, {term(0, 2)}, "A_yy"),
      make_slot(1, 0, {term(2, 0)}, "B_xx"), make_slot(1, 0, {term(0, 2)}, "B_yy"),
      make_slot(0, 0, {term(1, 1)}, "A_xy"), make_slot(1, 0, {term(1, 1)}, "B_xy"),
      make_slot(0, 0, {term(1, 0)}, "A_x"),  make_slot(1, 0, {term(1, 0)}, "B_x"),
      make_slot(0, 0, {term(0, 1)}, "A_y"),  make_slot(1, 0, {term(0, 1)}, "B_y"),
  };
}

std::vector<Slot> umbilic_layout() {
  auto v1 = [](int p) {
    return make_slot(p, 0, {term(2, 0, 0, 0.5), term(0, 2, 0, -0.5)}, std::string(point_name(p)) + "_v1");
  };
  return {
      make_slot(0, 0, {term(3, 0)}, "A_xxx"), make_slot(0, 0, {term(1, 2)}, "A_xyy"),
      make_slot(1, 0, {term(3, 0)}, "B_xxx"), make_slot(1, 0, {term(1, 2)}, "B_xyy"),
      make_slot(0, 0, {term(2, 1)}, "A_xxy"), make_slot(0, 0, {term(0, 3)}, "A_yyy"),
      make_slot(1, 0, {term(2, 1)}, "B_xxy"), make_slot(1, 0, {term(0, 3)}, "B_yyy"),
      v1(0),
      v1(1),
      make_slot(0, 0, {term(1, 1)}, "A_xy"),  make_slot(1, 0, {term(1, 1)}, "B_xy"),
  };
}

int permutation_sign(const std::vector<int>& perm) {
  int inversions = 0;
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = i + 1; j < perm.size(); ++j)
      if (perm[i] > perm[j]) ++inversions;
  return inversions % 2 ? -1 : 1;
}

void local_to_global(const SingularityKind& kind, std::vector<int>& a, std::vector<int>& b) {
  switch (kind.tag) {
    case KindTag::VectorZero: {
      const int m = kind.n * kind.n;
      a.resize(m);
      b.resize(m);
      std::iota(a.begin(), a.end(), 0);
      std::iota(b.begin(), b.end(), m);
      return;
    }
    case KindTag::Critical2D:
      a = {0, 1, 4};
      b = {2, 3, 5};
      return;
    case KindTag::Umbilic2D:
      a = {0, 1, 4, 5};
      b = {2, 3, 6, 7};
      return;
  }
}

void build_matchings(std::vector<int>& free, Matching& current, std::vector<Matching>& out) {
  if (free.empty()) {
    out.push_back(current);
    return;
  }
  const int first = free.front();
  for (std::size_t k = 1; k < free.size(); ++k) {
    const int partner = free[k];
    std::vector<int> rest;
    rest.reserve(free.size() - 2);
    for (std::size_t t = 1; t < free.size(); ++t)
      if (t != k) rest.push_back(free[t]);
    current.emplace_back(first, partner);
    build_matchings(rest, current, out);
    current.pop_back();
  }
}

double matching_product(const Eigen::MatrixXd& cov, std::span<const int> tau, const Matching& m) {
  double p = 1.0;
  for (auto [i, j] : m) p *= cov(tau[i], tau[j]);
  return p;
}

}  // namespace

double JacobianForm::evaluate(std::span<const double> local_slots) const {
  if (static_cast<int>(local_slots.size()) != m)
    throw ContractViolation("JacobianForm::evaluate: expected " + std::to_string(m) + " slot values");
  double sum = 0.0;
  for (const auto& mono : monomials) {
    double p = mono.sign;
    for (int s : mono.slots) p *= local_slots[s];
    sum += p;
  }
  return scale * sum;
}

std::vector<Slot> slot_layout(const SingularityKind& kind) {
  switch (kind.tag) {
    case KindTag::VectorZero:
      if (kind.n > 3) throw ContractViolation("vector zeros are supported for n <= 3");
      return vector_layout(kind.n);
    case KindTag::Critical2D: return critical_layout();
    case KindTag::Umbilic2D: return umbilic_layout();
  }
  return {};
}

JacobianForm jacobian_form(const SingularityKind& kind) {
  JacobianForm j;
  j.n = kind.n;
  switch (kind.tag) {
    case KindTag::VectorZero: {
      const int n = kind.n;
      j.m = n * n;
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      do {
        JacobianForm::Monomial mono;
        mono.sign = permutation_sign(perm);
        for (int i = 0; i < n; ++i) mono.slots.push_back(i * n + perm[i]);
        j.monomials.push_back(mono);
      } while (std::next_permutation(perm.begin(), perm.end()));
      break;
    }
    case KindTag::Critical2D:
      // f_xx f_yy - f_xy^2 over local slots (xx, yy, xy)
      j.m = 3;
      j.monomials = {{1, {0, 1}}, {-1, {2, 2}}};
      break;
    case KindTag::Umbilic2D:
      // 2J = f_xxx f_xyy + f_yyy f_xxy - f_xyy^2 - f_xxy^2 over (xxx, xyy, xxy, yyy)
      j.m = 4;
      j.scale = 0.5;
      j.monomials = {{1, {0, 1}}, {1, {3, 2}}, {-1, {1, 1}}, {-1, {2, 2}}};
      break;
  }
  return j;
}

double slot_covariance(const Slot& s, const Slot& t, const DerivedCorrelations& at_r,
                       const DerivedCorrelations& at_zero) {
  if (s.component != t.component) return 0.0;
  double sum = 0.0;
  for (const auto& a : s.terms) {
    for (const auto& b : t.terms) {
      std::array<int, 3> gamma{};
      int alpha_order = 0;
      for (int k = 0; k < 3; ++k) {
        gamma[k] = a.order[k] + b.order[k];
        alpha_order += a.order[k];
      }
      // <d^a f(x_s) d^b f(x_t)> = (-1)^|a| (d^(a+b) C)(x_t - x_s)
      double value;
      if (s.point == t.point) {
        value = mixed_partial(at_zero, gamma);
      } else {
        value = mixed_partial(at_r, gamma);
        if (s.point == 1 && (gamma[0] % 2)) value = -value;
      }
      if (alpha_order % 2) value = -value;
      sum += a.coeff * b.coeff * value;
    }
  }
  return sum;
}

SchemeProblem assemble_sigma(const SingularityKind& kind, const CorrelationModel& model, double r) {
  if (!(r > kSchemeRMin)) throw DegenerateSeparation(r, kSchemeRMin);
  SchemeProblem p;
  p.kind = kind;
  p.r = r;
  p.slots = slot_layout(kind);
  p.jacobian = jacobian_form(kind);
  local_to_global(kind, p.a_slots, p.b_slots);

  const int m = p.jacobian.m;
  const int n = kind.n;
  const int size = 2 * m + 2 * n;
  const auto at_r = derived_correlations(model, r);
  const auto at_zero = derived_correlations(model, 0.0);

  p.sigma.resize(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = i; j < size; ++j) {
      double v = slot_covariance(p.slots[i], p.slots[j], at_r, at_zero);
      p.sigma(i, j) = v;
      p.sigma(j, i) = v;
    }

  p.kmat = p.sigma.bottomRightCorner(2 * n, 2 * n);
  Eigen::LLT<Eigen::MatrixXd> llt(p.kmat);
  if (llt.info() != Eigen::Success) throw ConditioningError("assemble_sigma", 0.0);
  const double rcond = llt.rcond();
  if (!(rcond > kMinRcond)) throw ConditioningError("assemble_sigma", rcond);

  p.xi = schur_complement<double>(p.sigma, 2 * n);
  return p;
}

JacobiCheck jacobi_identity_double(const SchemeProblem& problem) {
  JacobiCheck c;
  c.det_sigma = problem.sigma.partialPivLu().determinant();
  c.det_k_det_xi = problem.kmat.partialPivLu().determinant() * problem.xi.partialPivLu().determinant();
  c.relative_error = std::abs(c.det_sigma - c.det_k_det_xi) / std::abs(c.det_sigma);
  return c;
}

JacobiCheck jacobi_identity_extended(const SchemeProblem& problem) {
  using Big = boost::multiprecision::cpp_bin_float_50;
  using BigMatrix = Eigen::Matrix<Big, Eigen::Dynamic, Eigen::Dynamic>;
  const BigMatrix sigma = problem.sigma.cast<Big>();
  const Eigen::Index k = problem.kmat.rows();
  const BigMatrix xi = schur_complement<Big>(sigma, k);
  const Big det_sigma = sigma.fullPivLu().determinant();
  const Big product = BigMatrix(sigma.bottomRightCorner(k, k)).fullPivLu().determinant() * xi.fullPivLu().determinant();
  JacobiCheck c;
  c.det_sigma = static_cast<double>(det_sigma);
  c.det_k_det_xi = static_cast<double>(product);
  c.relative_error = static_cast<double>(abs(det_sigma - product) / abs(det_sigma));
  return c;
}

double xi_entry(const SchemeProblem& problem, int i, int j) {
  const int size = static_cast<int>(problem.xi.rows());
  if (i < 1 || j < 1 || i > size || j > size) throw ContractViolation("xi_entry: index out of range");
  return problem.xi(i - 1, j - 1);
}

double xi_entry_bordered(const SchemeProblem& problem, int i, int j) {
  const int size = static_cast<int>(problem.xi.rows());
  if (i < 1 || j < 1 || i > size || j > size)
    throw ContractViolation("xi_entry_bordered: index out of range");
  const int k = static_cast<int>(problem.kmat.rows());
  Eigen::MatrixXd bordered(k + 1, k + 1);
  bordered(0, 0) = problem.sigma(i - 1, j - 1);
  bordered.block(0, 1, 1, k) = problem.sigma.block(i - 1, size, 1, k);
  bordered.block(1, 0, k, 1) = problem.sigma.block(size, j - 1, k, 1);
  bordered.bottomRightCorner(k, k) = problem.kmat;
  return bordered.partialPivLu().determinant() / problem.kmat.partialPivLu().determinant();
}

std::vector<Matching> wick_pairings(std::size_t size) {
  if (size % 2) throw ContractViolation("wick_pairings: odd number of factors");
  std::vector<int> free(size);
  std::iota(free.begin(), free.end(), 0);
  std::vector<Matching> out;
  Matching current;
  build_matchings(free, current, out);
  return out;
}

PairingSum pairing_sum(const Eigen::MatrixXd& cov, std::span<const int> indices) {
  PairingSum ps;
  ps.indices.assign(indices.begin(), indices.end());
  ps.pairings = wick_pairings(indices.size());
  for (const auto& m : ps.pairings) ps.value += matching_product(cov, indices, m);
  return ps;
}

double evaluate_D(const SchemeProblem& problem) {
  const auto& jac = problem.jacobian;
  const int n = jac.n;

  // <J_A> and <J_B> from pairings within one point.
  auto mean_jacobian = [&](const std::vector<int>& to_global) {
    if (n % 2) return 0.0;
    const auto matchings = wick_pairings(n);
    double sum = 0.0;
    std::vector<int> tau(n);
    for (const auto& mono : jac.monomials) {
      for (int k = 0; k < n; ++k) tau[k] = to_global[mono.slots[k]];
      double s = 0.0;
      for (const auto& m : matchings) s += matching_product(problem.xi, tau, m);
      sum += mono.sign * s;
    }
    return jac.scale * sum;
  };

  std::vector<Matching> connected;
  for (auto& m : wick_pairings(2 * n)) {
    bool cross = std::any_of(m.begin(), m.end(),
                             [n](const auto& pr) { return (pr.first < n) != (pr.second < n); });
    if (cross) connected.push_back(std::move(m));
  }

  double sum = 0.0;
  std::vector<int> tau(2 * n);
  for (const auto& ma : jac.monomials) {
    for (const auto& mb : jac.monomials) {
      for (int k = 0; k < n; ++k) {
        tau[k] = problem.a_slots[ma.slots[k]];
        tau[n + k] = problem.b_slots[mb.slots[k]];
      }
      double s = 0.0;
      for (const auto& m : connected) s += matching_product(problem.xi, tau, m);
      sum += ma.sign * mb.sign * s;
    }
  }
  return mean_jacobian(problem.a_slots) * mean_jacobian(problem.b_slots) + jac.scale * jac.scale * sum;
}

double scheme_g(const SingularityKind& kind, const CorrelationModel& model, double r) {
  const SchemeProblem p = assemble_sigma(kind, model, r);
  const double d = density(kind, model);
  const double det_k = p.kmat.llt().matrixLLT().diagonal().array().square().prod();
  return evaluate_D(p) / (d * d * std::pow(2.0 * std::numbers::pi, kind.n) * std::sqrt(det_k));
}

}  // namespace topocorr
