#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "contactkit/lattice.hpp"

namespace contactkit::oracle {

/// Subset state encoded as a bitmask over the chain's site list.
using StateMask = std::uint32_t;

inline constexpr int kMaxSites = 12;

/// Exact generator of the contact process restricted to a tiny site set S
/// (|S| <= 12): recovery rate 1 per infected site, infection rate
/// lambda * (#infected neighbors in S) per healthy site, infection attempts
/// leaving S discarded (killing). The empty set is absorbing.
struct SubsetChain {
  std::vector<engine::Point> sites;
  double lambda = 0.0;
  int site_count = 0;
  std::size_t state_count = 0;  // 2^site_count

  // Off-diagonal generator entries in CSR layout, plus total exit rates.
  std::vector<std::size_t> row_start;
  std::vector<StateMask> col;
  std::vector<double> rate;
  std::vector<double> exit_rate;

  /// State mask with exactly the listed sites infected.
  StateMask mask_of(const std::vector<engine::Point>& infected) const;
  int site_slot(const engine::Point& p) const;  // -1 when absent
};

/// Assembles the generator. Throws config_error for |S| > 12, duplicate
/// sites, mixed dimensions, or negative lambda.
SubsetChain build_subset_chain(const std::vector<engine::Point>& sites, double lambda);

/// Distribution over subset states at time t via uniformization, truncation
/// error below 1e-10 (adaptive term count).
std::vector<double> transient_probability(const SubsetChain& chain, StateMask initial, double t);

/// Probability that the target site is ever infected, starting from `initial`:
/// states containing the target are made absorbing; with a finite horizon the
/// modified chain is evaluated at T, otherwise the absorption probabilities
/// solve a linear system.
double hitting_probability(const SubsetChain& chain, StateMask initial, int target_site,
                           std::optional<double> horizon);

}  // namespace contactkit::oracle
