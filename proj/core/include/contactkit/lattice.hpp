#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace contactkit::engine {

using SiteIndex = std::int32_t;
inline constexpr SiteIndex kNoSite = -1;

/// Point in Z^d as a coordinate vector of length d.
using Point = std::vector<std::int32_t>;

/// Finite sublattice {x in Z^d : |x|_1 <= M} with a killing boundary:
/// every site has 2d candidate neighbors, and neighbors outside the box are
/// arrow targets that absorb nothing. Site indices enumerate the box in
/// lexicographic coordinate order, which fixes a deterministic bijection.
class Lattice {
 public:
  Lattice(int dimension, int radius);

  int dimension() const { return d_; }
  int radius() const { return radius_; }
  SiteIndex site_count() const { return static_cast<SiteIndex>(n_sites_); }
  int directions() const { return 2 * d_; }

  std::span<const std::int32_t> coordinates(SiteIndex site) const {
    return {coords_.data() + static_cast<std::size_t>(site) * d_, static_cast<std::size_t>(d_)};
  }
  Point point(SiteIndex site) const;

  /// Index of a point, or kNoSite when outside the box.
  SiteIndex site_index(std::span<const std::int32_t> point) const;
  SiteIndex site_index(const Point& point) const {
    return site_index(std::span<const std::int32_t>(point));
  }

  /// Neighbor along direction j (axis j/2, step +1 for even j, -1 for odd j);
  /// kNoSite when the neighbor lies outside the box.
  SiteIndex neighbor(SiteIndex site, int direction) const {
    return neighbors_[static_cast<std::size_t>(site) * 2 * d_ + direction];
  }

  int one_norm(SiteIndex site) const;
  bool on_boundary(SiteIndex site) const { return boundary_[site]; }

  SiteIndex origin() const { return origin_; }

  /// Coordinate of the out-of-box target of a killed arrow, for diagnostics.
  Point neighbor_point(SiteIndex site, int direction) const;

 private:
  int d_;
  int radius_;
  std::size_t n_sites_;
  SiteIndex origin_;
  std::vector<std::int32_t> coords_;     // n_sites * d, lexicographically sorted
  std::vector<SiteIndex> neighbors_;     // n_sites * 2d
  std::vector<std::uint8_t> boundary_;   // |x|_1 == M
};

using LatticePtr = std::shared_ptr<const Lattice>;

/// Builds the 1-norm ball of the given radius. Throws config_error for
/// nonpositive dimension or radius.
LatticePtr build_lattice(int dimension, int radius);

}  // namespace contactkit::engine
