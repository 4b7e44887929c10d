#pragma once

// Truncated multivariate Taylor arithmetic over a MultiIndexSet.
//
// A Jet stores exact mixed partial derivatives (not factorial-scaled
// Taylor coefficients) of a traced scalar at one evaluation point.

#include <array>
#include <cmath>
#include <vector>

#include "cdpinn/errors.hpp"
#include "cdpinn/multi_index.hpp"

namespace cdpinn {

class Jet {
 public:
  Jet() = default;
  Jet(IndexSetPtr set, double value) : set_(std::move(set)), c_(set_->size(), 0.0) { c_[0] = value; }
  Jet(IndexSetPtr set, std::vector<double> coeffs) : set_(std::move(set)), c_(std::move(coeffs)) {
    if (static_cast<int>(c_.size()) != set_->size()) throw ShapeError("jet coefficient count mismatch");
  }

  /// Independent variable `coord` evaluated at `value`.
  static Jet variable(IndexSetPtr set, int coord, double value) {
    Jet j(set, value);
    int p = j.set_->find(MultiIndex{coord});
    if (p >= 0) j.c_[p] = 1.0;
    return j;
  }

  const IndexSetPtr& index_set() const { return set_; }
  double value() const { return c_[0]; }
  double coeff(int pos) const { return c_[pos]; }
  double& coeff(int pos) { return c_[pos]; }
  const std::vector<double>& coeffs() const { return c_; }
  double operator[](const MultiIndex& a) const { return c_[set_->require(a)]; }

  /// Faa di Bruno: composes a univariate function with derivatives
  /// d[0..3] at value() onto this jet.
  Jet compose(const std::array<double, 4>& d) const {
    Jet r(set_, d[0]);
    for (int p = 1; p < set_->size(); ++p) {
      double acc = 0.0;
      for (const auto& t : set_->partitions(p)) {
        double prod = d[t.order];
        for (int b = 0; b < t.order; ++b) prod *= c_[t.blocks[b]];
        acc += prod;
      }
      r.c_[p] = acc;
    }
    return r;
  }

  Jet& operator+=(const Jet& o) {
    check(o);
    for (size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    check(o);
    for (size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator*=(double s) {
    for (auto& x : c_) x *= s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) { return a *= -1.0; }
  friend Jet operator+(Jet a, double b) { a.c_[0] += b; return a; }
  friend Jet operator+(double b, Jet a) { a.c_[0] += b; return a; }
  friend Jet operator-(Jet a, double b) { a.c_[0] -= b; return a; }
  friend Jet operator-(double b, Jet a) { a *= -1.0; a.c_[0] += b; return a; }
  friend Jet operator*(Jet a, double b) { return a *= b; }
  friend Jet operator*(double b, Jet a) { return a *= b; }
  friend Jet operator/(Jet a, double b) { return a *= 1.0 / b; }

  /// General Leibniz rule over the position splits of each index.
  friend Jet operator*(const Jet& a, const Jet& b) {
    a.check(b);
    Jet r(a.set_, 0.0);
    for (int p = 0; p < a.set_->size(); ++p) {
      double acc = 0.0;
      for (auto [l, m] : a.set_->splits(p)) acc += a.c_[l] * b.c_[m];
      r.c_[p] = acc;
    }
    return r;
  }
  friend Jet reciprocal(const Jet& a) {
    const double v = a.value();
    const double i1 = 1.0 / v;
    const double i2 = i1 * i1;
    return a.compose({i1, -i2, 2.0 * i2 * i1, -6.0 * i2 * i2});
  }
  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
  friend Jet operator/(double a, const Jet& b) { return a * reciprocal(b); }

  friend Jet tanh(const Jet& a) {
    const double s = std::tanh(a.value());
    const double s1 = 1.0 - s * s;
    return a.compose({s, s1, -2.0 * s * s1, -2.0 * s1 * (1.0 - 3.0 * s * s)});
  }
  friend Jet sin(const Jet& a) {
    const double s = std::sin(a.value()), c = std::cos(a.value());
    return a.compose({s, c, -s, -c});
  }
  friend Jet cos(const Jet& a) {
    const double s = std::sin(a.value()), c = std::cos(a.value());
    return a.compose({c, -s, -c, s});
  }
  friend Jet exp(const Jet& a) {
    const double e = std::exp(a.value());
    return a.compose({e, e, e, e});
  }
  friend Jet log(const Jet& a) {
    const double i = 1.0 / a.value();
    return a.compose({std::log(a.value()), i, -i * i, 2.0 * i * i * i});
  }
  friend Jet pow(const Jet& a, double q) {
    const double v = a.value();
    return a.compose({std::pow(v, q), q * std::pow(v, q - 1.0), q * (q - 1.0) * std::pow(v, q - 2.0),
                      q * (q - 1.0) * (q - 2.0) * std::pow(v, q - 3.0)});
  }
  friend Jet sqrt(const Jet& a) { return pow(a, 0.5); }

 private:
  void check(const Jet& o) const {
    if (set_ != o.set_ && !(*set_ == *o.set_)) throw ShapeError("jets built over different index sets");
  }

  IndexSetPtr set_;
  std::vector<double> c_;
};

inline double primal(const Jet& j) { return j.value(); }

}  // namespace cdpinn
