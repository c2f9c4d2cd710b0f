#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace skm {

/// Univariate polynomial, coefficients stored lowest degree first.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) { trim(); }

  const std::vector<double>& coeffs() const { return c_; }
  int degree() const { return static_cast<int>(c_.size()) - 1; }

  double operator()(double t) const {
    double v = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) v = v * t + *it;
    return v;
  }

  Polynomial derivative() const {
    if (c_.size() <= 1) return Polynomial({0.0});
    std::vector<double> d(c_.size() - 1);
    for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = static_cast<double>(i) * c_[i];
    return Polynomial(std::move(d));
  }

  Polynomial operator*(const Polynomial& o) const {
    std::vector<double> r(c_.size() + o.c_.size() - 1, 0.0);
    for (std::size_t i = 0; i < c_.size(); ++i)
      for (std::size_t j = 0; j < o.c_.size(); ++j) r[i + j] += c_[i] * o.c_[j];
    return Polynomial(std::move(r));
  }

  Polynomial operator+(const Polynomial& o) const {
    std::vector<double> r(std::max(c_.size(), o.c_.size()), 0.0);
    for (std::size_t i = 0; i < c_.size(); ++i) r[i] += c_[i];
    for (std::size_t i = 0; i < o.c_.size(); ++i) r[i] += o.c_[i];
    return Polynomial(std::move(r));
  }

  /// All real roots in [lo, hi], ascending. Roots of the derivative split the
  /// interval into monotone pieces, each bisected to machine precision.
  std::vector<double> real_roots(double lo, double hi) const {
    std::vector<double> out;
    if (!(lo <= hi)) return out;
    const int deg = degree();
    if (deg <= 0) return out;
    if (deg == 1) {
      const double r = -c_[0] / c_[1];
      if (r >= lo && r <= hi) out.push_back(r);
      return out;
    }
    if (deg == 2) {
      for (double r : quadratic_roots()) if (r >= lo && r <= hi) out.push_back(r);
      return out;
    }
    std::vector<double> knots{lo};
    for (double r : derivative().real_roots(lo, hi))
      if (r > knots.back()) knots.push_back(r);
    if (hi > knots.back()) knots.push_back(hi);
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
      const double a = knots[k], b = knots[k + 1];
      const double fa = (*this)(a), fb = (*this)(b);
      if (fa == 0.0) {
        push_unique(out, a);
        continue;
      }
      if ((fa < 0.0) != (fb < 0.0) || fb == 0.0) push_unique(out, bisect(a, b, fa).second);
    }
    if (!knots.empty() && (*this)(hi) == 0.0) push_unique(out, hi);
    return out;
  }

  /// Given p(lo) < 0, the first t in (lo, hi] with p(t) >= 0, rounded down so
  /// that p stays negative on [lo, result). nullopt if p < 0 throughout.
  std::optional<double> first_crossing_from_below(double lo, double hi) const {
    if (!(lo < hi) || degree() <= 0) return std::nullopt;
    std::vector<double> knots{lo};
    for (double r : derivative().real_roots(lo, hi))
      if (r > knots.back()) knots.push_back(r);
    if (hi > knots.back()) knots.push_back(hi);
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
      const double a = knots[k], b = knots[k + 1];
      const double fa = (*this)(a);
      if (fa >= 0.0) return a;
      if ((*this)(b) >= 0.0) return bisect(a, b, fa).first;
    }
    return std::nullopt;
  }

  /// Bisects a bracketed sign change of a monotone piece. Returns
  /// (last point with the sign of f(a), first point past the root).
  std::pair<double, double> bisect(double a, double b, double fa) const {
    const bool neg = fa < 0.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      const double fm = (*this)(mid);
      if (fm == 0.0) return {a, mid};
      if ((fm < 0.0) == neg)
        a = mid;
      else
        b = mid;
    }
    return {a, b};
  }

 private:
  void trim() {
    while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
    if (c_.empty()) c_.push_back(0.0);
  }

  static void push_unique(std::vector<double>& v, double x) {
    if (v.empty() || x > v.back()) v.push_back(x);
  }

  std::vector<double> quadratic_roots() const {
    const double a = c_[2], b = c_[1], c = c_[0];
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return {};
    const double sq = std::sqrt(disc);
    const double qv = -0.5 * (b + std::copysign(sq, b));
    std::vector<double> r;
    if (qv != 0.0) {
      r.push_back(qv / a);
      r.push_back(c / qv);
    } else {
      r.push_back(0.0);
    }
    std::sort(r.begin(), r.end());
    return r;
  }

  std::vector<double> c_{0.0};
};

}  // namespace skm
