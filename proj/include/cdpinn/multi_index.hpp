#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cdpinn/errors.hpp"

namespace cdpinn {

/// Highest derivative order a jet may carry.
inline constexpr int kMaxOrder = 3;

/// Sorted multiset of input coordinate ids, i.e. one mixed partial
/// derivative. The empty index denotes the primal value.
class MultiIndex {
 public:
  MultiIndex() = default;
  MultiIndex(std::initializer_list<int> coords) { assign(coords.begin(), coords.end()); }
  explicit MultiIndex(std::span<const int> coords) { assign(coords.begin(), coords.end()); }

  int order() const { return n_; }
  bool empty() const { return n_ == 0; }
  int operator[](int i) const { return c_[i]; }
  auto begin() const { return c_.begin(); }
  auto end() const { return c_.begin() + n_; }

  /// Index with one more derivative along `coord`.
  MultiIndex plus(int coord) const {
    if (n_ >= kMaxOrder) {
      throw UnsupportedOrderError("derivative order exceeds " + std::to_string(kMaxOrder));
    }
    MultiIndex r = *this;
    r.c_[r.n_++] = static_cast<std::uint8_t>(coord);
    std::sort(r.c_.begin(), r.c_.begin() + r.n_);
    return r;
  }

  /// Sub-index formed from the positions whose bit is set in `mask`.
  MultiIndex select(unsigned mask) const {
    MultiIndex r;
    for (int i = 0; i < n_; ++i) {
      if (mask & (1u << i)) r.c_[r.n_++] = c_[i];
    }
    return r;
  }

  friend bool operator==(const MultiIndex& a, const MultiIndex& b) {
    return a.n_ == b.n_ && std::equal(a.begin(), a.end(), b.begin());
  }
  /// Canonical order: by total order, then lexicographic.
  friend bool operator<(const MultiIndex& a, const MultiIndex& b) {
    if (a.n_ != b.n_) return a.n_ < b.n_;
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  }

  std::string str() const {
    std::string s = "(";
    for (int i = 0; i < n_; ++i) {
      if (i) s += ",";
      s += std::to_string(c_[i]);
    }
    return s + ")";
  }

 private:
  template <class It>
  void assign(It first, It last) {
    const auto n = std::distance(first, last);
    if (n > kMaxOrder) {
      throw UnsupportedOrderError("derivative pattern of order " + std::to_string(n) +
                                  " exceeds the supported order " + std::to_string(kMaxOrder));
    }
    n_ = static_cast<std::uint8_t>(n);
    int i = 0;
    for (; first != last; ++first) {
      if (*first < 0 || *first > 255) throw ShapeError("coordinate id out of range");
      c_[i++] = static_cast<std::uint8_t>(*first);
    }
    std::sort(c_.begin(), c_.begin() + n_);
  }

  std::array<std::uint8_t, kMaxOrder> c_{};
  std::uint8_t n_ = 0;
};

/// Downward-closed set of multi-indices with the combinatorial tables that
/// jet arithmetic needs (set partitions for composition, subset splits for
/// products). Immutable once built; shared between jets via shared_ptr.
class MultiIndexSet {
 public:
  /// One Faa di Bruno term: f^(order)(a0) * prod a[blocks[i]].
  struct Term {
    int order = 0;
    std::array<int, kMaxOrder> blocks{};
  };

  MultiIndexSet(std::vector<int> tracked, std::span<const MultiIndex> patterns)
      : tracked_(std::move(tracked)) {
    std::sort(tracked_.begin(), tracked_.end());
    tracked_.erase(std::unique(tracked_.begin(), tracked_.end()), tracked_.end());
    std::vector<MultiIndex> all{MultiIndex{}};
    for (const auto& p : patterns) {
      for (int c : p) {
        if (!std::binary_search(tracked_.begin(), tracked_.end(), c)) {
          throw ShapeError("pattern " + p.str() + " references untracked coordinate " +
                           std::to_string(c));
        }
      }
      const unsigned full = 1u << p.order();
      for (unsigned mask = 0; mask < full; ++mask) all.push_back(p.select(mask));
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    idx_ = std::move(all);
    for (int i = 0; i < size(); ++i) pos_.emplace(idx_[i], i);
    build_tables();
  }

  int size() const { return static_cast<int>(idx_.size()); }
  const MultiIndex& at(int pos) const { return idx_[pos]; }
  const std::vector<MultiIndex>& indices() const { return idx_; }
  const std::vector<int>& tracked() const { return tracked_; }
  int max_order() const { return idx_.back().order(); }

  /// Position of `a`, or -1.
  int find(const MultiIndex& a) const {
    auto it = pos_.find(a);
    return it == pos_.end() ? -1 : it->second;
  }
  int require(const MultiIndex& a) const {
    int p = find(a);
    if (p < 0) throw StencilError("jet does not carry coefficient " + a.str());
    return p;
  }
  bool contains(const MultiIndex& a) const { return find(a) >= 0; }

  /// Position of the index at `pos` with one more derivative along `coord`,
  /// or -1 if absent.
  int augment(int pos, int coord) const {
    if (idx_[pos].order() >= kMaxOrder) return -1;
    return find(idx_[pos].plus(coord));
  }

  const std::vector<Term>& partitions(int pos) const { return partitions_[pos]; }
  const std::vector<std::pair<int, int>>& splits(int pos) const { return splits_[pos]; }

  friend bool operator==(const MultiIndexSet& a, const MultiIndexSet& b) {
    return a.idx_ == b.idx_;
  }

 private:
  void build_tables() {
    // Set partitions of {0..n-1} for n <= 3, written as lists of block masks.
    static const std::vector<std::vector<unsigned>> kP1 = {{0b1}};
    static const std::vector<std::vector<unsigned>> kP2 = {{0b11}, {0b01, 0b10}};
    static const std::vector<std::vector<unsigned>> kP3 = {
        {0b111}, {0b011, 0b100}, {0b101, 0b010}, {0b110, 0b001}, {0b001, 0b010, 0b100}};
    partitions_.resize(idx_.size());
    splits_.resize(idx_.size());
    for (int p = 0; p < size(); ++p) {
      const MultiIndex& a = idx_[p];
      const int n = a.order();
      if (n > 0) {
        const auto& table = n == 1 ? kP1 : n == 2 ? kP2 : kP3;
        for (const auto& blocks : table) {
          Term t;
          t.order = static_cast<int>(blocks.size());
          for (int b = 0; b < t.order; ++b) t.blocks[b] = find(a.select(blocks[b]));
          partitions_[p].push_back(t);
        }
      }
      const unsigned full = 1u << n;
      for (unsigned mask = 0; mask < full; ++mask) {
        splits_[p].emplace_back(find(a.select(mask)), find(a.select(~mask & (full - 1))));
      }
    }
  }

  std::vector<int> tracked_;
  std::vector<MultiIndex> idx_;
  std::map<MultiIndex, int> pos_;
  std::vector<std::vector<Term>> partitions_;
  std::vector<std::vector<std::pair<int, int>>> splits_;
};

using IndexSetPtr = std::shared_ptr<const MultiIndexSet>;

/// Downward closure of `patterns` over the tracked coordinates.
inline IndexSetPtr make_index_set(std::vector<int> tracked, std::span<const MultiIndex> patterns) {
  return std::make_shared<const MultiIndexSet>(std::move(tracked), patterns);
}

inline IndexSetPtr make_index_set(std::vector<int> tracked,
                                  std::initializer_list<MultiIndex> patterns) {
  std::vector<MultiIndex> p(patterns);
  return make_index_set(std::move(tracked), std::span<const MultiIndex>(p));
}

/// Builds a pattern from raw coordinate lists; throws UnsupportedOrderError
/// above order 3.
inline std::vector<MultiIndex> patterns_from(const std::vector<std::vector<int>>& lists) {
  std::vector<MultiIndex> out;
  out.reserve(lists.size());
  for (const auto& l : lists) out.emplace_back(std::span<const int>(l));
  return out;
}

}  // namespace cdpinn
