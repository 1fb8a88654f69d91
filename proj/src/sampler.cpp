#include "topocorr/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include "topocorr/analytic.hpp"
#include "topocorr/errors.hpp"
#include "topocorr/field.hpp"

namespace topocorr {

namespace {

constexpr double kPi = std::numbers::pi;

// Sample variance and covariance from running sums over n items.
double sample_cov(double sum_ab, double sum_a, double sum_b, double n) {
  if (n < 2) return 0.0;
  return (sum_ab - sum_a * sum_b / n) / (n - 1);
}

}  // namespace

std::size_t PairGeometry::bins() const {
  return static_cast<std::size_t>(std::ceil(r_max / bin_width - 1e-9));
}

void PairGeometry::validate() const {
  if (!(bin_width > 0.0)) throw ContractViolation("bin width must be positive");
  if (!(r_max >= bin_width)) throw ContractViolation("r_max must be at least one bin wide");
  if (!(margin >= r_max)) throw ContractViolation("r_max must not exceed the margin");
  if (!(side > 2.0 * margin)) throw ContractViolation("window side must exceed twice the margin");
}

RealizationPairs count_pairs(std::span<const Singularity> points, const PairGeometry& geometry) {
  const std::size_t nb = geometry.bins();
  RealizationPairs out;
  out.sum_qq.assign(nb, 0.0);
  out.pairs.assign(nb, 0);

  std::vector<Singularity> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const Singularity& a, const Singularity& b) { return a.x < b.x; });
  const Box inner = geometry.inner();
  const double r_max2 = geometry.r_max * geometry.r_max;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Singularity& c = sorted[i];
    if (!inner.contains(c.x, c.y)) continue;
    ++out.centers;
    out.inner_charge += c.charge;
    if (c.charge > 0) ++out.positive;
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), c.x - geometry.r_max,
                               [](const Singularity& s, double x) { return s.x < x; });
    for (auto it = lo; it != sorted.end() && it->x <= c.x + geometry.r_max; ++it) {
      if (&*it == &c) continue;
      const double dx = it->x - c.x, dy = it->y - c.y;
      const double r2 = dx * dx + dy * dy;
      if (r2 > r_max2) continue;
      const auto b = std::min(static_cast<std::size_t>(std::sqrt(r2) / geometry.bin_width), nb - 1);
      out.sum_qq[b] += c.charge * it->charge;
      ++out.pairs[b];
    }
  }
  return out;
}

PairHistogram::PairHistogram(PairGeometry geometry) : geometry_(geometry) {
  const std::size_t nb = geometry_.bins();
  for (auto* v : {&sum_qq_, &sum_qq_sq_, &sum_qq_n_, &cum_sq_, &cum_n_}) v->assign(nb, 0.0);
  pairs_.assign(nb, 0);
}

double PairHistogram::r_hi(std::size_t b) const {
  return b + 1 == bins() ? geometry_.r_max : geometry_.bin_width * static_cast<double>(b + 1);
}

double PairHistogram::shell_area(std::size_t b) const {
  const double a = r_lo(b), c = r_hi(b);
  return kPi * (c * c - a * a);
}

void PairHistogram::add(const RealizationPairs& r) {
  if (r.sum_qq.size() != bins()) throw ContractViolation("PairHistogram::add: bin count mismatch");
  ++realizations_;
  const double n = static_cast<double>(r.centers);
  n_sum_ += n;
  n_sq_ += n * n;
  centers_ += r.centers;
  const double p = static_cast<double>(r.positive);
  pos_sum_ += p;
  pos_sq_ += p * p;
  pos_n_ += p * n;
  abs_charge_sum_ += std::abs(static_cast<double>(r.inner_charge));
  double cum = 0.0;
  for (std::size_t b = 0; b < bins(); ++b) {
    const double s = r.sum_qq[b];
    sum_qq_[b] += s;
    sum_qq_sq_[b] += s * s;
    sum_qq_n_[b] += s * n;
    cum += s;
    cum_sq_[b] += cum * cum;
    cum_n_[b] += cum * n;
    pairs_[b] += r.pairs[b];
  }
}

PairHistogram& PairHistogram::operator+=(const PairHistogram& o) {
  if (o.bins() != bins()) throw ContractViolation("PairHistogram merge: bin count mismatch");
  realizations_ += o.realizations_;
  n_sum_ += o.n_sum_;
  n_sq_ += o.n_sq_;
  centers_ += o.centers_;
  pos_sum_ += o.pos_sum_;
  pos_sq_ += o.pos_sq_;
  pos_n_ += o.pos_n_;
  abs_charge_sum_ += o.abs_charge_sum_;
  for (std::size_t b = 0; b < bins(); ++b) {
    sum_qq_[b] += o.sum_qq_[b];
    sum_qq_sq_[b] += o.sum_qq_sq_[b];
    sum_qq_n_[b] += o.sum_qq_n_[b];
    cum_sq_[b] += o.cum_sq_[b];
    cum_n_[b] += o.cum_n_[b];
    pairs_[b] += o.pairs_[b];
  }
  return *this;
}

PairHistogram::Estimate PairHistogram::density() const {
  const double N = static_cast<double>(realizations_);
  const double area = geometry_.inner().area();
  if (N == 0) return {};
  const double var_n = sample_cov(n_sq_, n_sum_, n_sum_, N);
  return {n_sum_ / (N * area), std::sqrt(var_n / N) / area};
}

PairHistogram::Estimate PairHistogram::g(std::size_t b) const {
  const double N = static_cast<double>(realizations_);
  if (N == 0 || n_sum_ == 0) return {};
  const double area = geometry_.inner().area();
  const double n = n_sum_ / N, s = sum_qq_[b] / N;
  const double scale = area / shell_area(b);
  const double var_s = sample_cov(sum_qq_sq_[b], sum_qq_[b], sum_qq_[b], N);
  const double cov_sn = sample_cov(sum_qq_n_[b], sum_qq_[b], n_sum_, N);
  const double var_n = sample_cov(n_sq_, n_sum_, n_sum_, N);
  // g = scale * s / n^2; linearised variance of the ratio of means.
  const double var = var_s / std::pow(n, 4) - 4 * s * cov_sn / std::pow(n, 5) + 4 * s * s * var_n / std::pow(n, 6);
  return {scale * s / (n * n), scale * std::sqrt(std::max(var, 0.0) / N)};
}

PairHistogram::Estimate PairHistogram::cumulative_charge(std::size_t b) const {
  const double N = static_cast<double>(realizations_);
  if (N == 0 || n_sum_ == 0) return {};
  double cum_sum = 0.0;
  for (std::size_t k = 0; k <= b; ++k) cum_sum += sum_qq_[k];
  const double n = n_sum_ / N, c = cum_sum / N;
  const double var_c = sample_cov(cum_sq_[b], cum_sum, cum_sum, N);
  const double cov_cn = sample_cov(cum_n_[b], cum_sum, n_sum_, N);
  const double var_n = sample_cov(n_sq_, n_sum_, n_sum_, N);
  const double var = var_c / (n * n) - 2 * c * cov_cn / std::pow(n, 3) + c * c * var_n / std::pow(n, 4);
  return {c / n, std::sqrt(std::max(var, 0.0) / N)};
}

PairHistogram::Estimate PairHistogram::positive_fraction() const {
  const double N = static_cast<double>(realizations_);
  if (N == 0 || n_sum_ == 0) return {};
  const double n = n_sum_ / N, p = pos_sum_ / N, f = p / n;
  const double var_p = sample_cov(pos_sq_, pos_sum_, pos_sum_, N);
  const double cov_pn = sample_cov(pos_n_, pos_sum_, n_sum_, N);
  const double var_n = sample_cov(n_sq_, n_sum_, n_sum_, N);
  const double var = (var_p - 2 * f * cov_pn + f * f * var_n) / (n * n);
  return {f, std::sqrt(std::max(var, 0.0) / N)};
}

double PairHistogram::mean_abs_inner_charge() const {
  return realizations_ ? abs_charge_sum_ / static_cast<double>(realizations_) : 0.0;
}

double analytic_bin_average(const SingularityKind& kind, const CorrelationModel& model, double a, double b) {
  if (!(b > a && a >= 0.0)) throw ContractViolation("analytic_bin_average: need 0 <= a < b");
  const double dq = topocorr::cumulative_charge(kind, model, b) - topocorr::cumulative_charge(kind, model, a);
  return dq / (density(kind, model) * kPi * (b * b - a * a));
}

CurveComparison compare_with_analytic(const PairHistogram& hist, const SingularityKind& kind,
                                      const CorrelationModel& model, double r_lo, double r_hi) {
  CurveComparison out;
  for (std::size_t b = 0; b < hist.bins(); ++b) {
    if (hist.r_lo(b) < r_lo - 1e-12 || hist.r_hi(b) > r_hi + 1e-12) continue;
    const auto e = hist.g(b);
    if (!(e.std_error > 0.0)) {
      ++out.empty_bins;
      continue;
    }
    const double want = analytic_bin_average(kind, model, hist.r_lo(b), hist.r_hi(b));
    const double z = (e.value - want) / e.std_error;
    out.chi2 += z * z;
    ++out.bins_used;
  }
  return out;
}

SimulationResult simulate(const SimulationConfig& config, const CorrelationModel& model) {
  config.geometry.validate();
  if (config.realizations == 0) throw ContractViolation("simulate: need at least one realization");

  const std::size_t N = config.realizations;
  std::vector<RealizationPairs> pairs(N);
  std::vector<DetectionDiagnostics> diags(N);
  std::vector<std::vector<Singularity>> kept(config.keep_detections ? N : 0);

  auto work = [&](std::size_t k) {
    const FieldRealization field =
        synthesize(model, config.kind, config.geometry.side, config.waves, realization_seed(config.seed, k));
    DetectionResult det = detect(field, model);
    pairs[k] = count_pairs(det.singularities, config.geometry);
    diags[k] = det.diagnostics;
    if (config.keep_detections) kept[k] = std::move(det.singularities);
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(N)));
  if (threads == 1) {
    for (std::size_t k = 0; k < N; ++k) work(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < N;) {
          try {
            work(k);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  SimulationResult result;
  result.histogram = PairHistogram(config.geometry);
  for (std::size_t k = 0; k < N; ++k) {
    result.histogram.add(pairs[k]);
    result.diagnostics += diags[k];
  }
  result.detections = std::move(kept);
  return result;
}

}  // namespace topocorr
