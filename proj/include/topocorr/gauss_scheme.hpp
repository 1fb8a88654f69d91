#pragma once

// Charge correlations from the joint Gaussian statistics of two points.
//
// The random vector u holds, in order, the m jacobian slots at A, the m
// slots at B, then the n components of the defining vector at A and B.
// Sigma = <u u^T>, K is its lower-right 2n x 2n block and Xi is the Schur
// complement of K (the covariance of the slots conditioned on v_A = v_B = 0).
// Then g = D / (d^2 (2 pi)^n sqrt(det K)) with D = <J_A J_B> under Xi.
//
// Slot orderings (0-based positions in u):
//   vector(n): A slots d_j v_i at (i-1)n + (j-1), then B slots, then
//              v_A1..v_An, v_B1..v_Bn
//   critical:  A_xx A_yy B_xx B_yy A_xy B_xy | A_x B_x A_y B_y
//   umbilic:   A_xxx A_xyy B_xxx B_xyy A_xxy A_yyy B_xxy B_yyy |
//              A_v1 B_v1 A_xy B_xy      with v1 = (f_xx - f_yy)/2

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topocorr/correlation_model.hpp"
#include "topocorr/kinds.hpp"

namespace topocorr {

/// Separations at or below this are refused by assemble_sigma.
inline constexpr double kSchemeRMin = 1e-3;

/// One term coeff * d^order f_component.
struct SlotTerm {
  double coeff = 1.0;
  std::array<int, 3> order{};
};

/// A linear combination of derivatives of one field component at one point
/// (0 = A at the origin, 1 = B at r along x).
struct Slot {
  int point = 0;
  int component = 0;
  std::vector<SlotTerm> terms;
  std::string label;
};

/// J = scale * sum_k sign_k * prod(slots_k); slot indices are local (0..m-1).
struct JacobianForm {
  struct Monomial {
    int sign = 1;
    std::vector<int> slots;
  };
  int n = 0;
  int m = 0;
  double scale = 1.0;
  std::vector<Monomial> monomials;

  double evaluate(std::span<const double> local_slots) const;
};

struct SchemeProblem {
  SingularityKind kind;
  double r = 0.0;
  std::vector<Slot> slots;  // 2m + 2n entries in u order
  Eigen::MatrixXd sigma;    // (2m + 2n) square
  Eigen::MatrixXd kmat;     // 2n square
  Eigen::MatrixXd xi;       // 2m square
  JacobianForm jacobian;
  std::vector<int> a_slots;  // position in u of local slot k at A
  std::vector<int> b_slots;  // same at B
};

std::vector<Slot> slot_layout(const SingularityKind& kind);
JacobianForm jacobian_form(const SingularityKind& kind);

/// Sigma for two points at separation r. Throws DegenerateSeparation for
/// r <= kSchemeRMin and ConditioningError if K cannot be factorised.
SchemeProblem assemble_sigma(const SingularityKind& kind, const CorrelationModel& model, double r);

/// Xi = A - B K^-1 B^T for Sigma = [[A, B], [B^T, K]] with K of size k.
/// Templated so that the identity checks can rerun it in extended precision.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> schur_complement(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& sigma, Eigen::Index k) {
  const Eigen::Index m = sigma.rows() - k;
  const auto b = sigma.topRightCorner(m, k);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> kinv_bt =
      sigma.bottomRightCorner(k, k).ldlt().solve(b.transpose());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> xi = sigma.topLeftCorner(m, m) - b * kinv_bt;
  return (xi + xi.transpose()) / Scalar(2);
}

/// Both sides of det Sigma = det K det Xi for an assembled problem.
struct JacobiCheck {
  double det_sigma = 0.0;
  double det_k_det_xi = 0.0;
  double relative_error = 0.0;
};
/// In double precision, using the stored Xi.
JacobiCheck jacobi_identity_double(const SchemeProblem& problem);
/// Treats the assembled Sigma as exact and evaluates determinants and the
/// Schur complement with 50 significant digits. Ring-spectrum Sigma has
/// condition numbers near 1e14 at r ~ 0.3 (the field obeys f_xx + f_yy = -f),
/// beyond what double-precision determinants resolve.
JacobiCheck jacobi_identity_extended(const SchemeProblem& problem);

/// Covariance of two slots, <s t>, at separation r.
double slot_covariance(const Slot& s, const Slot& t, const DerivedCorrelations& at_r,
                       const DerivedCorrelations& at_zero);

/// Xi_ij with 1-based indices (1 <= i, j <= 2m).
double xi_entry(const SchemeProblem& problem, int i, int j);

/// The same entry from the bordered determinant
/// det[[Sigma_ij, Sigma_iK], [Sigma_Kj, K]] / det K.
double xi_entry_bordered(const SchemeProblem& problem, int i, int j);

/// Perfect matchings of positions 0..size-1, each as a list of position pairs.
using Matching = std::vector<std::pair<int, int>>;
std::vector<Matching> wick_pairings(std::size_t size);

/// Matchings of a slot multiset and the Gaussian moment they sum to.
struct PairingSum {
  std::vector<int> indices;
  std::vector<Matching> pairings;
  double value = 0.0;
};
PairingSum pairing_sum(const Eigen::MatrixXd& cov, std::span<const int> indices);

/// D = <J_A J_B> under Xi. Pairings that stay inside one point are summed
/// as <J_A><J_B> so that large-r values do not cancel.
double evaluate_D(const SchemeProblem& problem);

/// g(r) = D / (d^2 (2 pi)^n sqrt(det K)).
double scheme_g(const SingularityKind& kind, const CorrelationModel& model, double r);

}  // namespace topocorr
