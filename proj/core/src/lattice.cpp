#include "contactkit/lattice.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "contactkit/errors.hpp"

namespace contactkit::engine {

namespace {

int abs_sum(std::span<const std::int32_t> p) {
  int s = 0;
  for (auto c : p) s += std::abs(c);
  return s;
}

}  // namespace

Lattice::Lattice(int dimension, int radius) : d_(dimension), radius_(radius) {
  if (dimension < 1) throw config_error("lattice dimension must be >= 1");
  if (radius < 1) throw config_error("lattice radius must be >= 1");

  // Odometer over [-M, M]^d in lexicographic order, keeping |x|_1 <= M.
  std::vector<std::int32_t> x(static_cast<std::size_t>(d_), -radius_);
  while (true) {
    if (abs_sum(x) <= radius_) coords_.insert(coords_.end(), x.begin(), x.end());
    int axis = d_ - 1;
    while (axis >= 0 && x[axis] == radius_) {
      x[axis] = -radius_;
      --axis;
    }
    if (axis < 0) break;
    ++x[axis];
  }
  n_sites_ = coords_.size() / static_cast<std::size_t>(d_);

  boundary_.resize(n_sites_);
  neighbors_.assign(n_sites_ * static_cast<std::size_t>(2 * d_), kNoSite);
  std::vector<std::int32_t> nb(static_cast<std::size_t>(d_));
  for (std::size_t i = 0; i < n_sites_; ++i) {
    auto p = coordinates(static_cast<SiteIndex>(i));
    boundary_[i] = (abs_sum(p) == radius_);
    for (int j = 0; j < 2 * d_; ++j) {
      std::copy(p.begin(), p.end(), nb.begin());
      nb[j / 2] += (j % 2 == 0) ? 1 : -1;
      neighbors_[i * static_cast<std::size_t>(2 * d_) + j] = site_index(nb);
    }
  }

  std::vector<std::int32_t> o(static_cast<std::size_t>(d_), 0);
  origin_ = site_index(o);
}

Point Lattice::point(SiteIndex site) const {
  auto p = coordinates(site);
  return Point(p.begin(), p.end());
}

SiteIndex Lattice::site_index(std::span<const std::int32_t> point) const {
  if (point.size() != static_cast<std::size_t>(d_)) return kNoSite;
  if (abs_sum(point) > radius_) return kNoSite;
  // Coordinates are stored sorted lexicographically; binary search by row.
  std::size_t lo = 0, hi = n_sites_;
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    auto row = coordinates(static_cast<SiteIndex>(mid));
    if (std::lexicographical_compare(row.begin(), row.end(), point.begin(), point.end()))
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo < n_sites_) {
    auto row = coordinates(static_cast<SiteIndex>(lo));
    if (std::equal(row.begin(), row.end(), point.begin())) return static_cast<SiteIndex>(lo);
  }
  return kNoSite;
}

int Lattice::one_norm(SiteIndex site) const { return abs_sum(coordinates(site)); }

Point Lattice::neighbor_point(SiteIndex site, int direction) const {
  Point p = point(site);
  p[direction / 2] += (direction % 2 == 0) ? 1 : -1;
  return p;
}

LatticePtr build_lattice(int dimension, int radius) {
  return std::make_shared<Lattice>(dimension, radius);
}

}  // namespace contactkit::engine
