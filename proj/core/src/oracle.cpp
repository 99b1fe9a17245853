#include "contactkit/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "contactkit/errors.hpp"

namespace contactkit::oracle {

namespace {

int one_norm_distance(const engine::Point& a, const engine::Point& b) {
  int s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

}  // namespace

StateMask SubsetChain::mask_of(const std::vector<engine::Point>& infected) const {
  StateMask m = 0;
  for (const auto& p : infected) {
    const int slot = site_slot(p);
    if (slot < 0) throw config_error("infected site is not part of the chain");
    m |= StateMask{1} << slot;
  }
  return m;
}

int SubsetChain::site_slot(const engine::Point& p) const {
  for (std::size_t i = 0; i < sites.size(); ++i)
    if (sites[i] == p) return static_cast<int>(i);
  return -1;
}

SubsetChain build_subset_chain(const std::vector<engine::Point>& sites, double lambda) {
  if (sites.empty() || sites.size() > kMaxSites)
    throw config_error("subset chain supports 1..12 sites");
  if (lambda < 0.0) throw config_error("infection rate must be nonnegative");
  const std::size_t dim = sites.front().size();
  for (const auto& p : sites)
    if (p.size() != dim) throw config_error("chain sites must share one dimension");
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j)
      if (sites[i] == sites[j]) throw config_error("chain sites must be distinct");

  SubsetChain chain;
  chain.sites = sites;
  chain.lambda = lambda;
  chain.site_count = static_cast<int>(sites.size());
  chain.state_count = std::size_t{1} << chain.site_count;

  // Neighbor slots within S (|x - y|_1 == 1); everything else is killed.
  std::vector<std::vector<int>> nbr(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = 0; j < sites.size(); ++j)
      if (i != j && one_norm_distance(sites[i], sites[j]) == 1) nbr[i].push_back(static_cast<int>(j));

  chain.row_start.assign(chain.state_count + 1, 0);
  chain.exit_rate.assign(chain.state_count, 0.0);
  for (StateMask m = 0; m < chain.state_count; ++m) {
    chain.row_start[m] = chain.col.size();
    for (int i = 0; i < chain.site_count; ++i) {
      const StateMask bit = StateMask{1} << i;
      if (m & bit) {
        chain.col.push_back(m & ~bit);
        chain.rate.push_back(1.0);
        chain.exit_rate[m] += 1.0;
      } else {
        int k = 0;
        for (int j : nbr[i])
          if (m & (StateMask{1} << j)) ++k;
        if (k > 0 && lambda > 0.0) {
          chain.col.push_back(m | bit);
          chain.rate.push_back(lambda * k);
          chain.exit_rate[m] += lambda * k;
        }
      }
    }
  }
  chain.row_start[chain.state_count] = chain.col.size();
  return chain;
}

namespace {

// One uniformized jump step: out = in * P with P = I + Q/Lambda. Rows listed
// in `frozen` (when nonempty) are treated as absorbing.
void jump_step(const SubsetChain& chain, double uniform_rate, const std::vector<std::uint8_t>* frozen,
               const std::vector<double>& in, std::vector<double>& out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (StateMask m = 0; m < chain.state_count; ++m) {
    const double mass = in[m];
    if (mass == 0.0) continue;
    if (frozen && (*frozen)[m]) {
      out[m] += mass;
      continue;
    }
    out[m] += mass * (1.0 - chain.exit_rate[m] / uniform_rate);
    for (std::size_t k = chain.row_start[m]; k < chain.row_start[m + 1]; ++k)
      out[chain.col[k]] += mass * chain.rate[k] / uniform_rate;
  }
}

std::vector<double> uniformize(const SubsetChain& chain, StateMask initial, double t,
                               const std::vector<std::uint8_t>* frozen) {
  std::vector<double> p(chain.state_count, 0.0);
  p[initial] = 1.0;
  if (t <= 0.0) return p;

  double uniform_rate = 0.0;
  for (StateMask m = 0; m < chain.state_count; ++m)
    if (!(frozen && (*frozen)[m])) uniform_rate = std::max(uniform_rate, chain.exit_rate[m]);
  if (uniform_rate == 0.0) return p;

  const double a = uniform_rate * t;
  constexpr double kTolerance = 1e-12;  // leaves total truncation well under 1e-10
  const std::size_t max_terms =
      static_cast<std::size_t>(a + 12.0 * std::sqrt(a + 1.0) + 60.0);

  std::vector<double> acc(chain.state_count, 0.0);
  std::vector<double> next(chain.state_count, 0.0);
  double cumulative = 0.0;
  for (std::size_t k = 0; k <= max_terms; ++k) {
    // Poisson weight in log space; small-k weights underflow harmlessly when
    // a is large.
    const double log_w = -a + static_cast<double>(k) * std::log(a) - std::lgamma(static_cast<double>(k) + 1.0);
    const double w = std::exp(log_w);
    if (w > 0.0) {
      for (StateMask m = 0; m < chain.state_count; ++m) acc[m] += w * p[m];
      cumulative += w;
    }
    if (cumulative >= 1.0 - kTolerance && static_cast<double>(k) >= a) break;
    jump_step(chain, uniform_rate, frozen, p, next);
    p.swap(next);
  }
  return acc;
}

}  // namespace

std::vector<double> transient_probability(const SubsetChain& chain, StateMask initial, double t) {
  if (t < 0.0) throw config_error("time must be nonnegative");
  if (initial >= chain.state_count) throw config_error("initial state out of range");
  return uniformize(chain, initial, t, nullptr);
}

double hitting_probability(const SubsetChain& chain, StateMask initial, int target_site,
                           std::optional<double> horizon) {
  if (target_site < 0 || target_site >= chain.site_count)
    throw config_error("target site is not part of the chain");
  if (initial >= chain.state_count) throw config_error("initial state out of range");

  const StateMask target_bit = StateMask{1} << target_site;
  if (initial & target_bit) return 1.0;

  if (horizon) {
    // Absorb on first infection of the target, then read off the mass at T.
    std::vector<std::uint8_t> frozen(chain.state_count, 0);
    for (StateMask m = 0; m < chain.state_count; ++m)
      if (m & target_bit) frozen[m] = 1;
    std::vector<double> dist = uniformize(chain, initial, *horizon, &frozen);
    double total = 0.0;
    for (StateMask m = 0; m < chain.state_count; ++m)
      if (m & target_bit) total += dist[m];
    return total;
  }

  // Infinite horizon: absorption probabilities of the embedded jump chain.
  // Transient states are the nonempty subsets avoiding the target.
  std::vector<std::int64_t> index(chain.state_count, -1);
  std::vector<StateMask> transient;
  for (StateMask m = 1; m < chain.state_count; ++m) {
    if (m & target_bit) continue;
    index[m] = static_cast<std::int64_t>(transient.size());
    transient.push_back(m);
  }
  if (index[initial] < 0) return initial == 0 ? 0.0 : 1.0;

  const auto n = static_cast<Eigen::Index>(transient.size());
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (Eigen::Index row = 0; row < n; ++row) {
    const StateMask m = transient[static_cast<std::size_t>(row)];
    triplets.emplace_back(row, row, 1.0);
    const double total = chain.exit_rate[m];
    for (std::size_t k = chain.row_start[m]; k < chain.row_start[m + 1]; ++k) {
      const StateMask to = chain.col[k];
      const double prob = chain.rate[k] / total;
      if (to & target_bit)
        b[row] += prob;
      else if (to != 0)
        triplets.emplace_back(row, static_cast<Eigen::Index>(index[to]), -prob);
    }
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
  solver.analyzePattern(A);
  solver.factorize(A);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("hitting probability solve failed to factorize");
  Eigen::VectorXd h = solver.solve(b);
  return h[static_cast<Eigen::Index>(index[initial])];
}

}  // namespace contactkit::oracle
