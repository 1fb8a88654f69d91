#pragma once

// Truncated Taylor arithmetic in one variable.
//
// A Taylor<N> holds the first N Taylor coefficients of a function about a
// point r: f(r + e) = c[0] + c[1] e + ... + c[N-1] e^{N-1} + O(e^N).
// Arithmetic propagates all coefficients exactly (forward-mode automatic
// differentiation), so derivatives of long closed-form expressions can be
// evaluated without finite differences.

#include <array>
#include <cmath>
#include <cstddef>

namespace topocorr {

template <std::size_t N>
class Taylor {
  static_assert(N >= 1);

 public:
  constexpr Taylor() = default;
  constexpr Taylor(double value) { c_[0] = value; }  // NOLINT(implicit)

  /// The independent variable at r: coefficients (r, 1, 0, ...).
  static constexpr Taylor variable(double r) {
    Taylor t(r);
    if constexpr (N > 1) t.c_[1] = 1.0;
    return t;
  }

  /// Builds a jet from derivative values f(r), f'(r), f''(r), ...
  template <class Range>
  static Taylor from_derivatives(const Range& d) {
    Taylor t;
    double fact = 1.0;
    for (std::size_t k = 0; k < N; ++k) {
      if (k > 0) fact *= static_cast<double>(k);
      t.c_[k] = d[k] / fact;
    }
    return t;
  }

  constexpr double value() const { return c_[0]; }
  constexpr double coeff(std::size_t k) const { return c_[k]; }
  constexpr double& coeff(std::size_t k) { return c_[k]; }

  /// k-th derivative with respect to r.
  double derivative(std::size_t k) const {
    double fact = 1.0;
    for (std::size_t j = 2; j <= k; ++j) fact *= static_cast<double>(j);
    return c_[k] * fact;
  }

  /// d/dr, losing the highest coefficient.
  Taylor<(N > 1 ? N - 1 : 1)> differentiate() const {
    Taylor<(N > 1 ? N - 1 : 1)> d;
    for (std::size_t k = 1; k < N; ++k)
      d.coeff(k - 1) = static_cast<double>(k) * c_[k];
    return d;
  }

  template <std::size_t M>
  Taylor<M> truncate() const {
    static_assert(M <= N);
    Taylor<M> t;
    for (std::size_t k = 0; k < M; ++k) t.coeff(k) = c_[k];
    return t;
  }

  Taylor operator-() const {
    Taylor t;
    for (std::size_t k = 0; k < N; ++k) t.c_[k] = -c_[k];
    return t;
  }

  Taylor& operator+=(const Taylor& o) {
    for (std::size_t k = 0; k < N; ++k) c_[k] += o.c_[k];
    return *this;
  }
  Taylor& operator-=(const Taylor& o) {
    for (std::size_t k = 0; k < N; ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Taylor& operator*=(const Taylor& o) { return *this = *this * o; }
  Taylor& operator/=(const Taylor& o) { return *this = *this / o; }

  friend Taylor operator+(Taylor a, const Taylor& b) { return a += b; }
  friend Taylor operator-(Taylor a, const Taylor& b) { return a -= b; }

  friend Taylor operator*(const Taylor& a, const Taylor& b) {
    Taylor t;
    for (std::size_t k = 0; k < N; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i <= k; ++i) s += a.c_[i] * b.c_[k - i];
      t.c_[k] = s;
    }
    return t;
  }

  friend Taylor operator/(const Taylor& a, const Taylor& b) {
    Taylor q;
    for (std::size_t k = 0; k < N; ++k) {
      double s = a.c_[k];
      for (std::size_t i = 1; i <= k; ++i) s -= b.c_[i] * q.c_[k - i];
      q.c_[k] = s / b.c_[0];
    }
    return q;
  }

  friend Taylor sqrt(const Taylor& a) {
    Taylor s;
    s.c_[0] = std::sqrt(a.c_[0]);
    for (std::size_t k = 1; k < N; ++k) {
      double acc = a.c_[k];
      for (std::size_t i = 1; i < k; ++i) acc -= s.c_[i] * s.c_[k - i];
      s.c_[k] = acc / (2.0 * s.c_[0]);
    }
    return s;
  }

  friend Taylor pow(const Taylor& a, int n) {
    Taylor r(1.0);
    Taylor base = a;
    bool neg = n < 0;
    unsigned e = static_cast<unsigned>(neg ? -n : n);
    while (e) {
      if (e & 1u) r = r * base;
      base = base * base;
      e >>= 1u;
    }
    return neg ? Taylor(1.0) / r : r;
  }

 private:
  std::array<double, N> c_{};
};

// Scalar helpers so that templated formulas work for double and Taylor<N>.
inline double value_of(double x) { return x; }
template <std::size_t N>
double value_of(const Taylor<N>& x) { return x.value(); }

inline double pow(double x, int n) { return std::pow(x, n); }

}  // namespace topocorr
