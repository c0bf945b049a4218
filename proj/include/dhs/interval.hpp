#ifndef DHS_INTERVAL_HPP_
#define DHS_INTERVAL_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dhs {

/* Closed interval [lo, hi] used for natural interval extension of the
 * dynamics expressions. Plain double endpoints; the downstream soundness
 * gates carry explicit tolerances, so no directed rounding here. */
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  Interval(double v) : lo(v), hi(v) {}
  Interval(double l, double h) : lo(l), hi(h) {
    if (l > h) throw std::invalid_argument("interval: lo > hi");
  }

  static Interval hull(double a, double b) {
    return Interval(std::min(a, b), std::max(a, b));
  }

  double mag() const { return std::max(std::fabs(lo), std::fabs(hi)); }
  double width() const { return hi - lo; }
  bool contains(double v) const { return lo <= v && v <= hi; }
  bool contains_zero() const { return lo <= 0.0 && 0.0 <= hi; }
  bool is_point() const { return lo == hi; }
};

inline Interval operator+(const Interval& a, const Interval& b) {
  return {a.lo + b.lo, a.hi + b.hi};
}
inline Interval operator-(const Interval& a, const Interval& b) {
  return {a.lo - b.hi, a.hi - b.lo};
}
inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }

inline Interval operator*(const Interval& a, const Interval& b) {
  const double p1 = a.lo * b.lo, p2 = a.lo * b.hi;
  const double p3 = a.hi * b.lo, p4 = a.hi * b.hi;
  return {std::min(std::min(p1, p2), std::min(p3, p4)),
          std::max(std::max(p1, p2), std::max(p3, p4))};
}

inline Interval operator/(const Interval& a, const Interval& b) {
  if (b.contains_zero())
    throw std::domain_error("interval division by interval containing zero");
  return a * Interval(1.0 / b.hi, 1.0 / b.lo);
}

inline Interval sin(const Interval& x) {
  if (x.width() >= 2.0 * M_PI) return {-1.0, 1.0};
  // scan critical points k*pi + pi/2 inside [lo, hi]
  double lo = std::min(std::sin(x.lo), std::sin(x.hi));
  double hi = std::max(std::sin(x.lo), std::sin(x.hi));
  const double k0 = std::ceil((x.lo - M_PI / 2.0) / M_PI);
  for (double k = k0;; k += 1.0) {
    const double c = k * M_PI + M_PI / 2.0;
    if (c > x.hi) break;
    const double s = std::sin(c);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return {lo, hi};
}

inline Interval cos(const Interval& x) {
  return sin(x + Interval(M_PI / 2.0));
}

inline Interval exp(const Interval& x) { return {std::exp(x.lo), std::exp(x.hi)}; }

inline Interval pow_int(const Interval& x, long long n) {
  if (n == 0) return Interval(1.0);
  if (n < 0) return Interval(1.0) / pow_int(x, -n);
  if (n % 2 == 0) {
    const double m = x.mag();
    const double lo = x.contains_zero() ? 0.0
                                        : std::min(std::pow(x.lo, (double)n),
                                                   std::pow(x.hi, (double)n));
    return {lo, std::pow(m, (double)n)};
  }
  return {std::pow(x.lo, (double)n), std::pow(x.hi, (double)n)};
}

inline Interval intersect(const Interval& a, const Interval& b) {
  return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

}  // namespace dhs

#endif
