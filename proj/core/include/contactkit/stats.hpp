#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "contactkit/experiment.hpp"
#include "contactkit/hitting.hpp"

namespace contactkit::stats {

using engine::kInf;
using engine::LatticePtr;
using engine::Point;
using engine::SiteIndex;
using hitting::Verdict;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;

  bool contains(double x) const { return lo <= x && x <= hi; }
  bool overlaps(const Interval& other) const { return lo <= other.hi && other.lo <= hi; }
};

// ---------------------------------------------------------------------------
// Scalar statistics helpers
// ---------------------------------------------------------------------------

/// Inverse standard normal CDF (Acklam's rational approximation plus one
/// Halley refinement); |error| < 1e-12 on (0, 1).
double normal_quantile(double p);

/// Wilson score interval at the given two-sided confidence level.
Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double confidence);
/// Wilson score interval at a fixed z value (e.g. z = 3 for 3-sigma checks).
Interval wilson_interval_z(std::uint64_t successes, std::uint64_t trials, double z);

/// Kolmogorov distribution tail Q(x) = 2 sum_k (-1)^{k-1} exp(-2 k^2 x^2).
double kolmogorov_q(double x);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};

/// One-sample Kolmogorov-Smirnov test of the samples against Exp(1).
KsResult ks_test_exp1(std::vector<double> samples);

// ---------------------------------------------------------------------------
// Replica batches
// ---------------------------------------------------------------------------

/// Sites whose hitting times / essential records each replica stores.
struct TrackingPlan {
  std::vector<SiteIndex> hit_sites;        // sorted unique; always holds the origin
  std::vector<SiteIndex> essential_sites;  // sorted unique

  int hit_slot(SiteIndex site) const;
  int essential_slot(SiteIndex site) const;
  bool operator==(const TrackingPlan&) const = default;
};

/// Outcome of one replica. Hitting/essential payloads are only populated for
/// accepted (SURVIVES) replicas; estimators of conditioned quantities must
/// never read anything else.
struct ReplicaRecord {
  std::uint64_t replica_id = 0;
  Verdict verdict = Verdict::AMBIGUOUS;
  bool boundary_contact = false;
  double extinction_time = kInf;  // finite when the global process died

  std::vector<double> hit_times;                     // aligned with plan.hit_sites
  std::vector<hitting::EssentialRecord> essentials;  // aligned with plan.essential_sites
};

struct BatchCounts {
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
  std::uint64_t ambiguous = 0;
  std::uint64_t total() const { return accepted + rejected + ambiguous; }
  bool operator==(const BatchCounts&) const = default;
};

/// Replica outcomes in replica-id order. Estimator sums always run in id
/// order, so batch statistics are exactly invariant under record reordering
/// and under splitting/merging.
struct ReplicaBatch {
  LatticePtr lattice;
  TrackingPlan plan;
  std::uint64_t root_seed = 0;
  double horizon = 0.0;
  std::vector<ReplicaRecord> records;

  static ReplicaBatch from_records(LatticePtr lattice, TrackingPlan plan, std::uint64_t root_seed,
                                   double horizon, std::vector<ReplicaRecord> records);

  BatchCounts counts() const;
  double boundary_contact_fraction() const;
};

/// Count-weighted pooling of two batches over the same plan (disjoint ids).
ReplicaBatch merge(const ReplicaBatch& a, const ReplicaBatch& b);

/// Tracking plan implied by an experiment configuration. Throws config_error
/// when a required site falls outside the box.
TrackingPlan derive_plan(const cli::ExperimentConfig& config, const engine::Lattice& lattice);

/// Simulates one replica from scratch; pure function of (config, plan, id).
ReplicaRecord simulate_replica(const LatticePtr& lattice, const cli::ExperimentConfig& config,
                               const TrackingPlan& plan, std::uint64_t replica_id);

struct RunOutcome {
  ReplicaBatch batch;
  bool cap_exceeded = false;
  std::uint64_t attempts = 0;
};

/// Generates replicas in id order until the accepted count reaches the target
/// or the attempt cap is exhausted. Deterministic for fixed (config, seed):
/// the worker count changes wall time only.
RunOutcome run_replicas_outcome(const cli::ExperimentConfig& config, int threads = 1);

/// Same, but throws acceptance_cap_error (with diagnostics) on cap exhaustion.
ReplicaBatch run_replicas(const cli::ExperimentConfig& config, int threads = 1);

// ---------------------------------------------------------------------------
// Estimators (all conditioned on accepted replicas)
// ---------------------------------------------------------------------------

struct RhoEstimate {
  double rho_hat = 0.0;
  Interval ci;               // Wilson over accepted/(accepted+rejected)
  double rho_low = 0.0;      // ambiguous counted as DIES
  double rho_high = 0.0;     // ambiguous counted as SURVIVES
  BatchCounts counts;
};

RhoEstimate estimate_rho(const ReplicaBatch& batch, double confidence = 0.95);

struct MuEstimate {
  int n = 0;
  double mu_hat = 0.0;       // mean of t(nx)/n over accepted replicas, finite t only
  double std_error = 0.0;
  std::uint64_t finite_count = 0;
  double flagged_fraction = 0.0;  // accepted replicas with t(nx) censored at T
};

struct MuReport {
  Point direction;
  std::vector<MuEstimate> per_n;
  double drift_rel = 0.0;  // |mu(n1)-mu(n2)| / mu(n2) for the two largest n
};

MuReport estimate_mu(const ReplicaBatch& batch, const Point& direction,
                     const std::vector<int>& n_list);

/// Ordering statistics along a ray: p_hat[k-1] estimates the probability that
/// site (k-1)x is hit no later than site kx, for k = 1..n.
struct OrderStats {
  Point direction;
  int n = 0;
  std::uint64_t accepted = 0;
  std::vector<double> p_hat;
  std::vector<Interval> ci;
  std::vector<double> mean_t;            // per k, finite-only mean of t(kx)
  std::vector<double> flagged_fraction;  // per k, pairs with a censored member
  double cesaro = 0.0;                   // arithmetic mean of p_hat
  double increase_density = 0.0;         // fraction of k with mean_t[k] >= mean_t[k-1]
  bool operator==(const OrderStats&) const = default;
};

OrderStats theorem1_order_stats(const ReplicaBatch& batch, const Point& direction, int n,
                                double confidence = 0.95);

struct PairMomentStat {
  Point x;
  Point y;
  double distance = 0.0;  // |x-y|_1
  double ratio = 0.0;     // mean |t(x)-t(y)|^p / distance^p
  Interval bootstrap_ci;
  std::uint64_t finite_count = 0;
  double flagged_fraction = 0.0;
};

struct DistanceAggregate {
  double distance = 0.0;
  double ratio = 0.0;  // pooled over all pairs at this distance
  Interval bootstrap_ci;
  std::uint64_t samples = 0;
};

struct MomentStats {
  double p = 0.0;
  std::vector<PairMomentStat> pairs;
  std::vector<DistanceAggregate> by_distance;
};

MomentStats theorem2_moment_stats(const ReplicaBatch& batch,
                                  const std::vector<std::pair<Point, Point>>& pairs, double p,
                                  int bootstrap_resamples = 1000);

struct TailCurve {
  std::vector<Point> sites;
  std::vector<double> l_grid;

  std::vector<double> pooled_q;             // per L: P(sigma - t > L), pooled over sites
  std::vector<Interval> pooled_ci;
  std::vector<std::uint64_t> pooled_exceed; // exceedance counts per L
  std::vector<std::vector<double>> site_q;  // [site][L]
  std::vector<std::vector<Interval>> site_ci;

  double gamma_hat = 0.0;  // slope of log(-log q) against log L
  Interval gamma_bootstrap_ci;
  std::size_t fit_points = 0;
  std::uint64_t samples = 0;   // (replica, site) gap observations
  std::uint64_t excluded = 0;  // records without a defined sigma
};

/// Tail of the sigma - t gap pooled over the given sites. The exponent fit
/// uses grid points with q in (0,1) and at least 10 exceedances; throws
/// fit_undefined_error when fewer than two such points exist.
TailCurve sigma_gap_tail(const ReplicaBatch& batch, const std::vector<Point>& sites,
                         const std::vector<double>& l_grid, int bootstrap_resamples = 1000);

}  // namespace contactkit::stats
