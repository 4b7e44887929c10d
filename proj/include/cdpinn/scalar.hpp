#pragma once

// Small forward-mode scalar types used to differentiate residual operators.
//
// Grad<N> carries a value and a dense gradient over N "slots" (jet
// coefficients read by a residual). Dual<S> adds one tangent direction on
// top of any scalar S. Residuals are evaluated with Dual<Grad<N>>: the
// tangent is the total derivative along one encoding component, and the
// gradients give the adjoint seeds for both the residual and its tangent.

#include <array>
#include <cmath>

namespace cdpinn {

template <int N>
struct Grad {
  double v = 0.0;
  std::array<double, N> g{};

  Grad() = default;
  Grad(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

  static Grad seed(double value, int slot) {
    Grad r(value);
    r.g[slot] = 1.0;
    return r;
  }

  /// Chain rule for a unary function with derivative `dv` at v.
  Grad chain(double fv, double dv) const {
    Grad r(fv);
    for (int i = 0; i < N; ++i) r.g[i] = dv * g[i];
    return r;
  }

  Grad& operator+=(const Grad& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) g[i] += o.g[i];
    return *this;
  }
  Grad& operator-=(const Grad& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) g[i] -= o.g[i];
    return *this;
  }
  Grad& operator*=(const Grad& o) {
    for (int i = 0; i < N; ++i) g[i] = g[i] * o.v + v * o.g[i];
    v *= o.v;
    return *this;
  }
  Grad& operator/=(const Grad& o) {
    const double inv = 1.0 / o.v;
    const double q = v * inv;
    for (int i = 0; i < N; ++i) g[i] = (g[i] - q * o.g[i]) * inv;
    v = q;
    return *this;
  }

  friend Grad operator-(Grad a) {
    a.v = -a.v;
    for (auto& x : a.g) x = -x;
    return a;
  }
  friend Grad operator+(Grad a, const Grad& b) { return a += b; }
  friend Grad operator-(Grad a, const Grad& b) { return a -= b; }
  friend Grad operator*(Grad a, const Grad& b) { return a *= b; }
  friend Grad operator/(Grad a, const Grad& b) { return a /= b; }
  friend Grad operator+(Grad a, double b) { a.v += b; return a; }
  friend Grad operator+(double b, Grad a) { a.v += b; return a; }
  friend Grad operator-(Grad a, double b) { a.v -= b; return a; }
  friend Grad operator-(double b, const Grad& a) { return b + (-a); }
  friend Grad operator*(Grad a, double b) {
    a.v *= b;
    for (auto& x : a.g) x *= b;
    return a;
  }
  friend Grad operator*(double b, Grad a) { return a * b; }
  friend Grad operator/(Grad a, double b) { return a * (1.0 / b); }
  friend Grad operator/(double b, const Grad& a) { return Grad(b) / a; }

  friend Grad sin(const Grad& a) { return a.chain(std::sin(a.v), std::cos(a.v)); }
  friend Grad cos(const Grad& a) { return a.chain(std::cos(a.v), -std::sin(a.v)); }
  friend Grad exp(const Grad& a) {
    const double e = std::exp(a.v);
    return a.chain(e, e);
  }
  friend Grad log(const Grad& a) { return a.chain(std::log(a.v), 1.0 / a.v); }
  friend Grad sqrt(const Grad& a) {
    const double s = std::sqrt(a.v);
    return a.chain(s, 0.5 / s);
  }
  friend Grad tanh(const Grad& a) {
    const double t = std::tanh(a.v);
    return a.chain(t, 1.0 - t * t);
  }
  friend Grad pow(const Grad& a, double p) {
    return a.chain(std::pow(a.v, p), p * std::pow(a.v, p - 1.0));
  }
};

template <class S>
struct Dual {
  S v{};
  S d{};

  Dual() = default;
  Dual(double value) : v(value), d(0.0) {}  // NOLINT(google-explicit-constructor)
  Dual(S value, S tangent) : v(std::move(value)), d(std::move(tangent)) {}

  friend Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
  friend Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
  friend Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return {a.v * b.v, a.d * b.v + a.v * b.d};
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    S q = a.v / b.v;
    return {q, (a.d - q * b.d) / b.v};
  }
  friend Dual operator+(const Dual& a, double b) { return {a.v + b, a.d}; }
  friend Dual operator+(double b, const Dual& a) { return {a.v + b, a.d}; }
  friend Dual operator-(const Dual& a, double b) { return {a.v - b, a.d}; }
  friend Dual operator-(double b, const Dual& a) { return {b - a.v, -a.d}; }
  friend Dual operator*(const Dual& a, double b) { return {a.v * b, a.d * b}; }
  friend Dual operator*(double b, const Dual& a) { return {a.v * b, a.d * b}; }
  friend Dual operator/(const Dual& a, double b) { return {a.v / b, a.d / b}; }
  friend Dual operator/(double b, const Dual& a) { return Dual(b) / a; }
  Dual& operator+=(const Dual& o) { return *this = *this + o; }
  Dual& operator-=(const Dual& o) { return *this = *this - o; }
  Dual& operator*=(const Dual& o) { return *this = *this * o; }

  friend Dual sin(const Dual& a) {
    using std::cos;
    using std::sin;
    return {sin(a.v), cos(a.v) * a.d};
  }
  friend Dual cos(const Dual& a) {
    using std::cos;
    using std::sin;
    return {cos(a.v), -(sin(a.v) * a.d)};
  }
  friend Dual exp(const Dual& a) {
    using std::exp;
    S e = exp(a.v);
    return {e, e * a.d};
  }
  friend Dual log(const Dual& a) {
    using std::log;
    return {log(a.v), a.d / a.v};
  }
  friend Dual sqrt(const Dual& a) {
    using std::sqrt;
    S s = sqrt(a.v);
    return {s, a.d / (2.0 * s)};
  }
  friend Dual tanh(const Dual& a) {
    using std::tanh;
    S t = tanh(a.v);
    return {t, (1.0 - t * t) * a.d};
  }
  friend Dual pow(const Dual& a, double p) {
    using std::pow;
    return {pow(a.v, p), p * pow(a.v, p - 1.0) * a.d};
  }
};

/// Slot capacity for residual gradients; a single residual component may
/// read at most this many distinct jet coefficients (value and tangent).
inline constexpr int kResidualSlots = 32;

using ResidualGrad = Grad<kResidualSlots>;
using ResidualScalar = Dual<ResidualGrad>;

inline double primal(double x) { return x; }
template <int N>
double primal(const Grad<N>& x) { return x.v; }
template <class S>
double primal(const Dual<S>& x) { return primal(x.v); }

}  // namespace cdpinn
