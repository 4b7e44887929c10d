#pragma once

// Tensor of solution values on a (t, x_1, ..., x_d) product grid, with
// provenance and solver parameters. Value layout: time slowest, then the
// space axes in order, output component fastest.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cdpinn/binary_io.hpp"
#include "cdpinn/errors.hpp"

namespace cdpinn {

class SolutionGrid {
 public:
  SolutionGrid() = default;
  SolutionGrid(std::vector<double> t, std::vector<std::vector<double>> x, int components, std::string provenance)
      : t_(std::move(t)), x_(std::move(x)), comps_(components), provenance_(std::move(provenance)) {
    if (t_.empty() || comps_ < 1) throw ShapeError("solution grid needs a time axis and >= 1 component");
    for (const auto& a : x_) {
      if (a.empty()) throw ShapeError("empty space axis");
    }
    values_.assign(node_count() * static_cast<std::size_t>(comps_), 0.0);
  }

  const std::vector<double>& t() const { return t_; }
  const std::vector<double>& x(int axis) const { return x_.at(axis); }
  int space_dims() const { return static_cast<int>(x_.size()); }
  int components() const { return comps_; }
  const std::string& provenance() const { return provenance_; }
  std::map<std::string, double>& params() { return params_; }
  const std::map<std::string, double>& params() const { return params_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::size_t space_nodes() const {
    std::size_t n = 1;
    for (const auto& a : x_) n *= a.size();
    return n;
  }
  std::size_t node_count() const { return t_.size() * space_nodes(); }

  /// Flat index of (time index, space node, component).
  std::size_t index(std::size_t it, std::size_t space, int comp = 0) const {
    return (it * space_nodes() + space) * static_cast<std::size_t>(comps_) + static_cast<std::size_t>(comp);
  }
  double& operator()(std::size_t it, std::size_t space, int comp = 0) { return values_[index(it, space, comp)]; }
  double operator()(std::size_t it, std::size_t space, int comp = 0) const { return values_[index(it, space, comp)]; }

  double at_node(std::size_t node, int comp) const { return values_[node * static_cast<std::size_t>(comps_) + comp]; }

  /// Coordinates of a space node (multi-axis index unravelled, last axis fastest).
  std::vector<double> space_coords(std::size_t space) const {
    std::vector<double> x(x_.size());
    for (int a = space_dims() - 1; a >= 0; --a) {
      x[a] = x_[a][space % x_[a].size()];
      space /= x_[a].size();
    }
    return x;
  }
  std::pair<double, std::vector<double>> node_coords(std::size_t node) const {
    return {t_[node / space_nodes()], space_coords(node % space_nodes())};
  }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const SolutionGrid& a, const SolutionGrid& b) {
    return a.t_ == b.t_ && a.x_ == b.x_ && a.comps_ == b.comps_ && a.provenance_ == b.provenance_ &&
           a.params_ == b.params_ && a.values_ == b.values_;
  }

 private:
  std::vector<double> t_;
  std::vector<std::vector<double>> x_;
  int comps_ = 1;
  std::string provenance_;
  std::map<std::string, double> params_;
  std::vector<double> values_;
};

inline constexpr std::uint32_t kGridVersion = 1;

inline std::vector<std::uint8_t> serialize_grid(const SolutionGrid& g) {
  io::ByteWriter w;
  w.bytes("CDGR", 4);
  w.u32(kGridVersion);
  w.str(g.provenance());
  w.u32(static_cast<std::uint32_t>(g.params().size()));
  for (const auto& [k, v] : g.params()) {
    w.str(k);
    w.f64(v);
  }
  w.u64(g.t().size());
  w.f64s(g.t());
  w.u32(static_cast<std::uint32_t>(g.space_dims()));
  for (int a = 0; a < g.space_dims(); ++a) {
    w.u64(g.x(a).size());
    w.f64s(g.x(a));
  }
  w.u32(static_cast<std::uint32_t>(g.components()));
  w.u64(g.values().size());
  w.f64s(g.values());
  w.seal();
  return w.data();
}

inline void save_grid(const SolutionGrid& g, const std::string& path) {
  io::ByteWriter w;
  auto b = serialize_grid(g);
  w.bytes(b.data(), b.size());
  w.save(path);
}

inline SolutionGrid parse_grid(std::vector<std::uint8_t> bytes) {
  io::ByteReader<DataError> r(std::move(bytes));
  r.verify_seal();
  r.expect_magic("CDGR");
  const auto version = r.u32();
  if (version != kGridVersion) throw DataError("grid version " + std::to_string(version) + " unsupported");
  const std::string prov = r.str();
  std::map<std::string, double> params;
  const auto np = r.u32();
  for (std::uint32_t i = 0; i < np; ++i) {
    std::string k = r.str();
    params[k] = r.f64();
  }
  auto read_axis = [&] {
    const auto n = r.u64();
    if (n > (1ULL << 32)) throw DataError("corrupt file: axis length");
    std::vector<double> a(n);
    r.f64s(a);
    return a;
  };
  auto t = read_axis();
  const auto nd = r.u32();
  if (nd > 16) throw DataError("corrupt file: too many axes");
  std::vector<std::vector<double>> x;
  for (std::uint32_t a = 0; a < nd; ++a) x.push_back(read_axis());
  const auto comps = static_cast<int>(r.u32());
  SolutionGrid g(std::move(t), std::move(x), comps, prov);
  g.params() = std::move(params);
  if (r.u64() != g.values().size()) throw DataError("corrupt file: value count does not match axes");
  r.f64s(g.values());
  if (!r.at_end()) throw DataError("corrupt file: trailing bytes");
  return g;
}

inline SolutionGrid load_grid(const std::string& path) { return parse_grid(io::read_file<DataError>(path)); }

/// Long-format CSV: t, x0..., component, value.
inline void write_grid_csv(const SolutionGrid& g, std::ostream& os) {
  os << std::setprecision(17);
  os << "t";
  for (int a = 0; a < g.space_dims(); ++a) os << ",x" << a;
  os << ",component,value\n";
  for (std::size_t it = 0; it < g.t().size(); ++it) {
    for (std::size_t s = 0; s < g.space_nodes(); ++s) {
      const auto x = g.space_coords(s);
      for (int c = 0; c < g.components(); ++c) {
        os << g.t()[it];
        for (double xi : x) os << "," << xi;
        os << "," << c << "," << g(it, s, c) << "\n";
      }
    }
  }
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw ConfigError("linspace needs n >= 1");
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  v[n - 1] = hi;
  return v;
}

}  // namespace cdpinn
