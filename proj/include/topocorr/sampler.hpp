#pragma once

// Monte Carlo estimates of densities, signed pair correlations and the
// cumulative screening charge.
//
// Geometry: the window is [0, side]^2. Pair centers are the singularities in
// the inner window [margin, side - margin]^2; partners may lie anywhere in the
// window, so every shell up to r_max <= margin is fully observed and no edge
// correction is needed.
//
// Estimators (N = realizations, n_k centers and S_kb = sum q_i q_j over
// ordered center-partner pairs in bin b for realization k, A = inner area):
//   d = sum n_k / (N A),  g_b = sum_k S_kb / (d^2 N A shell_b),
//   Q(R_b) = sum_k sum_{b' <= b} S_kb' / (d N A).
// Errors are delta-method standard errors of these ratios over realizations.
// All accumulators are sums over realizations, so merging is associative and
// commutative.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "topocorr/correlation_model.hpp"
#include "topocorr/detection.hpp"
#include "topocorr/kinds.hpp"

namespace topocorr {

struct PairGeometry {
  double side = 40.0;
  double margin = 8.0;
  double bin_width = 0.1;
  double r_max = 8.0;

  Box inner() const { return {margin, margin, side - margin, side - margin}; }
  std::size_t bins() const;
  /// Throws ContractViolation unless 0 < bin_width <= r_max <= margin and side > 2 margin.
  void validate() const;
};

/// Sums from one realization.
struct RealizationPairs {
  std::vector<double> sum_qq;          // per bin
  std::vector<std::uint64_t> pairs;    // per bin
  std::uint64_t centers = 0;
  long long inner_charge = 0;          // sum of charges in the inner window
  std::uint64_t positive = 0;          // positive charges in the inner window
};
RealizationPairs count_pairs(std::span<const Singularity> points, const PairGeometry& geometry);

class PairHistogram {
 public:
  explicit PairHistogram(PairGeometry geometry);

  void add(const RealizationPairs& r);
  PairHistogram& operator+=(const PairHistogram& other);

  const PairGeometry& geometry() const { return geometry_; }
  std::size_t realizations() const { return realizations_; }
  std::size_t bins() const { return sum_qq_.size(); }
  double r_lo(std::size_t b) const { return geometry_.bin_width * static_cast<double>(b); }
  double r_hi(std::size_t b) const;
  double shell_area(std::size_t b) const;
  std::uint64_t pairs(std::size_t b) const { return pairs_[b]; }
  double sum_qq(std::size_t b) const { return sum_qq_[b]; }
  std::uint64_t centers() const { return centers_; }

  struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
  };
  Estimate density() const;
  Estimate g(std::size_t b) const;
  /// Q at the outer edge of bin b.
  Estimate cumulative_charge(std::size_t b) const;
  Estimate positive_fraction() const;
  /// Mean |total inner charge| per realization (boundary-dominated if screened).
  double mean_abs_inner_charge() const;

 private:
  PairGeometry geometry_;
  std::size_t realizations_ = 0;
  double n_sum_ = 0, n_sq_ = 0;
  std::uint64_t centers_ = 0;
  double pos_sum_ = 0, pos_sq_ = 0, pos_n_ = 0;
  double abs_charge_sum_ = 0;
  std::vector<double> sum_qq_, sum_qq_sq_, sum_qq_n_;
  std::vector<double> cum_sq_, cum_n_;
  std::vector<std::uint64_t> pairs_;
};

/// Reduced chi^2 of the empirical g against the bin-averaged analytic g over
/// bins lying inside [r_lo, r_hi]. Bins with zero standard error get no weight
/// and are counted in `empty_bins`.
struct CurveComparison {
  double chi2 = 0.0;
  std::size_t bins_used = 0;
  std::size_t empty_bins = 0;
  double reduced() const { return bins_used ? chi2 / static_cast<double>(bins_used) : 0.0; }
};
/// Shell average of analytic g over [a, b], exact through h.
double analytic_bin_average(const SingularityKind& kind, const CorrelationModel& model, double a, double b);
CurveComparison compare_with_analytic(const PairHistogram& hist, const SingularityKind& kind,
                                      const CorrelationModel& model, double r_lo, double r_hi);

struct SimulationConfig {
  SingularityKind kind = SingularityKind::vector(2);
  std::size_t realizations = 200;
  std::uint64_t seed = 1;
  PairGeometry geometry;
  std::size_t waves = 256;
  unsigned threads = 1;
  bool keep_detections = false;
};

struct SimulationResult {
  PairHistogram histogram{PairGeometry{}};
  DetectionDiagnostics diagnostics;
  std::vector<std::vector<Singularity>> detections;  // filled when keep_detections
};

/// Realization k uses realization_seed(seed, k); the result does not depend
/// on the thread count.
SimulationResult simulate(const SimulationConfig& config, const CorrelationModel& model);

}  // namespace topocorr
