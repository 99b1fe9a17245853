#include "contactkit/stats.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <thread>

#include "contactkit/errors.hpp"
#include "contactkit/rng.hpp"

namespace contactkit::stats {

// ---------------------------------------------------------------------------
// Scalar statistics
// ---------------------------------------------------------------------------

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw config_error("normal quantile requires p in (0, 1)");

  // Acklam's rational approximation.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // One Halley refinement against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

Interval wilson_interval_z(std::uint64_t successes, std::uint64_t trials, double z) {
  if (trials < 1) throw config_error("Wilson interval requires at least one trial");
  if (successes > trials) throw config_error("successes cannot exceed trials");
  if (z <= 0.0) throw config_error("Wilson interval requires z > 0");

  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {center - half, center + half};
}

Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0))
    throw config_error("confidence must lie in (0, 1)");
  return wilson_interval_z(successes, trials, normal_quantile(0.5 + confidence / 2.0));
}

double kolmogorov_q(double x) {
  if (x <= 0.0) return 1.0;
  double total = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    total += (k % 2 == 1) ? term : -term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * total, 0.0, 1.0);
}

KsResult ks_test_exp1(std::vector<double> samples) {
  if (samples.empty()) throw config_error("KS test requires samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = 1.0 - std::exp(-samples[i]);
    const double hi = (static_cast<double>(i) + 1.0) / n - cdf;
    const double lo = cdf - static_cast<double>(i) / n;
    d = std::max({d, hi, lo});
  }
  const double root_n = std::sqrt(n);
  const double lambda = (root_n + 0.12 + 0.11 / root_n) * d;
  return {d, kolmogorov_q(lambda)};
}

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

namespace {

int slot_of(const std::vector<SiteIndex>& sites, SiteIndex site) {
  auto it = std::lower_bound(sites.begin(), sites.end(), site);
  if (it == sites.end() || *it != site) return -1;
  return static_cast<int>(it - sites.begin());
}

Point scaled(const Point& x, int k) {
  Point out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = k * x[i];
  return out;
}

SiteIndex resolve_site(const engine::Lattice& lattice, const Point& p) {
  const SiteIndex s = lattice.site_index(p);
  if (s == engine::kNoSite) throw config_error("tracked site falls outside the box");
  return s;
}

template <typename F>
void for_accepted(const ReplicaBatch& batch, F&& fn) {
  for (const auto& r : batch.records)
    if (r.verdict == Verdict::SURVIVES) fn(r);
}

double percentile(std::vector<double>& sorted_values, double q) {
  const std::size_t n = sorted_values.size();
  const double idx = q * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = idx - static_cast<double>(lo);
  return sorted_values[lo] * (1.0 - frac) + sorted_values[hi] * frac;
}

// Percentile bootstrap over resampled index lists; `stat` may return NaN to
// reject a resample (e.g. fully censored).
template <typename Stat>
Interval bootstrap_interval(std::size_t n, int resamples, CounterStream stream, Stat&& stat) {
  if (n == 0 || resamples <= 0) return {std::nan(""), std::nan("")};
  std::vector<std::size_t> idx(n);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < n; ++i)
      idx[i] = static_cast<std::size_t>(stream.next_u64() % n);
    const double v = stat(std::span<const std::size_t>(idx));
    if (std::isfinite(v)) values.push_back(v);
  }
  if (values.empty()) return {std::nan(""), std::nan("")};
  std::sort(values.begin(), values.end());
  return {percentile(values, 0.025), percentile(values, 0.975)};
}

}  // namespace

int TrackingPlan::hit_slot(SiteIndex site) const { return slot_of(hit_sites, site); }
int TrackingPlan::essential_slot(SiteIndex site) const { return slot_of(essential_sites, site); }

ReplicaBatch ReplicaBatch::from_records(LatticePtr lattice, TrackingPlan plan,
                                        std::uint64_t root_seed, double horizon,
                                        std::vector<ReplicaRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const ReplicaRecord& a, const ReplicaRecord& b) { return a.replica_id < b.replica_id; });
  ReplicaBatch batch;
  batch.lattice = std::move(lattice);
  batch.plan = std::move(plan);
  batch.root_seed = root_seed;
  batch.horizon = horizon;
  batch.records = std::move(records);
  return batch;
}

BatchCounts ReplicaBatch::counts() const {
  BatchCounts c;
  for (const auto& r : records) {
    switch (r.verdict) {
      case Verdict::SURVIVES: ++c.accepted; break;
      case Verdict::DIES: ++c.rejected; break;
      case Verdict::AMBIGUOUS: ++c.ambiguous; break;
    }
  }
  return c;
}

double ReplicaBatch::boundary_contact_fraction() const {
  if (records.empty()) return 0.0;
  std::uint64_t n = 0;
  for (const auto& r : records)
    if (r.boundary_contact) ++n;
  return static_cast<double>(n) / static_cast<double>(records.size());
}

ReplicaBatch merge(const ReplicaBatch& a, const ReplicaBatch& b) {
  if (!(a.plan == b.plan)) throw config_error("cannot merge batches with different plans");
  std::vector<ReplicaRecord> all;
  all.reserve(a.records.size() + b.records.size());
  all.insert(all.end(), a.records.begin(), a.records.end());
  all.insert(all.end(), b.records.begin(), b.records.end());
  return ReplicaBatch::from_records(a.lattice, a.plan, a.root_seed, a.horizon, std::move(all));
}

TrackingPlan derive_plan(const cli::ExperimentConfig& config, const engine::Lattice& lattice) {
  std::vector<SiteIndex> hit{lattice.origin()};
  std::vector<SiteIndex> essential;

  switch (config.kind) {
    case cli::ExperimentKind::Rho:
      break;
    case cli::ExperimentKind::Shape:
      for (int n : config.n_list) {
        hit.push_back(resolve_site(lattice, scaled(config.direction, n)));
        hit.push_back(resolve_site(lattice, scaled(config.direction, -n)));
      }
      break;
    case cli::ExperimentKind::Theorem1:
      for (int k = 1; k <= config.order_n; ++k)
        hit.push_back(resolve_site(lattice, scaled(config.direction, k)));
      break;
    case cli::ExperimentKind::Theorem2:
      for (const auto& [x, y] : config.pairs) {
        hit.push_back(resolve_site(lattice, x));
        hit.push_back(resolve_site(lattice, y));
      }
      break;
    case cli::ExperimentKind::SigmaTail:
      for (const auto& site : config.tail_sites) {
        const SiteIndex s = resolve_site(lattice, site);
        hit.push_back(s);
        essential.push_back(s);
      }
      break;
  }

  std::sort(hit.begin(), hit.end());
  hit.erase(std::unique(hit.begin(), hit.end()), hit.end());
  std::sort(essential.begin(), essential.end());
  essential.erase(std::unique(essential.begin(), essential.end()), essential.end());
  return {std::move(hit), std::move(essential)};
}

ReplicaRecord simulate_replica(const LatticePtr& lattice, const cli::ExperimentConfig& config,
                               const TrackingPlan& plan, std::uint64_t replica_id) {
  const engine::EventLog log =
      engine::EventLog::generate(lattice, config.rate_spec(), config.horizon, config.root_seed,
                                 replica_id);

  engine::TraceRequest request;
  request.start_time = 0.0;
  request.end_time = config.horizon;
  request.record_first_hits = true;
  request.span_sites = plan.essential_sites;
  const engine::ConfigurationSet initial = engine::ConfigurationSet::single(lattice->origin());
  const engine::TraceResult trace = engine::run_trace(log, initial, request);
  const hitting::SurvivalVerdict verdict = hitting::classify_trace(trace);

  ReplicaRecord record;
  record.replica_id = replica_id;
  record.verdict = verdict.verdict;
  record.boundary_contact = verdict.boundary_contact;
  record.extinction_time = verdict.extinction_time.value_or(kInf);
  if (record.verdict != Verdict::SURVIVES) return record;

  record.hit_times.reserve(plan.hit_sites.size());
  for (SiteIndex s : plan.hit_sites) record.hit_times.push_back(trace.first_hit[s]);
  record.essentials.reserve(plan.essential_sites.size());
  for (std::size_t i = 0; i < plan.essential_sites.size(); ++i)
    record.essentials.push_back(
        hitting::essential_from_trace(log, trace, trace.spans[i], plan.essential_sites[i]));
  return record;
}

RunOutcome run_replicas_outcome(const cli::ExperimentConfig& config, int threads) {
  if (config.replica_target < 1) throw config_error("replica target must be at least 1");
  if (config.attempt_cap < config.replica_target)
    throw config_error("attempt cap must be at least the replica target");

  const LatticePtr lattice = engine::build_lattice(config.dimension, config.radius);
  TrackingPlan plan = derive_plan(config, *lattice);
  const int workers = std::max(1, threads);

  std::vector<ReplicaRecord> records;
  std::uint64_t accepted = 0;
  std::uint64_t next_id = 0;
  bool reached_target = false;

  // Replicas are processed in fixed windows of ids; outcomes are pure
  // functions of the replica id, so the worker count never changes results.
  const std::uint64_t window = std::max<std::uint64_t>(64, static_cast<std::uint64_t>(16 * workers));
  while (!reached_target && next_id < config.attempt_cap) {
    const std::uint64_t begin = next_id;
    const std::uint64_t end = std::min(config.attempt_cap, begin + window);
    std::vector<ReplicaRecord> slots(static_cast<std::size_t>(end - begin));

    if (workers == 1) {
      for (std::uint64_t id = begin; id < end; ++id)
        slots[static_cast<std::size_t>(id - begin)] = simulate_replica(lattice, config, plan, id);
    } else {
      std::atomic<std::uint64_t> cursor{begin};
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          while (true) {
            const std::uint64_t id = cursor.fetch_add(1);
            if (id >= end) return;
            slots[static_cast<std::size_t>(id - begin)] = simulate_replica(lattice, config, plan, id);
          }
        });
      }
      for (auto& t : pool) t.join();
    }

    for (auto& record : slots) {
      if (record.verdict == Verdict::SURVIVES) ++accepted;
      records.push_back(std::move(record));
      ++next_id;
      if (accepted == config.replica_target) {
        reached_target = true;
        break;
      }
    }
  }

  RunOutcome outcome;
  outcome.attempts = next_id;
  outcome.cap_exceeded = !reached_target;
  outcome.batch = ReplicaBatch::from_records(lattice, std::move(plan), config.root_seed,
                                             config.horizon, std::move(records));
  return outcome;
}

ReplicaBatch run_replicas(const cli::ExperimentConfig& config, int threads) {
  RunOutcome outcome = run_replicas_outcome(config, threads);
  if (outcome.cap_exceeded) {
    const BatchCounts c = outcome.batch.counts();
    throw acceptance_cap_error("attempt cap exhausted before reaching the accepted target",
                               outcome.attempts, c.accepted, c.rejected, c.ambiguous);
  }
  return outcome.batch;
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

RhoEstimate estimate_rho(const ReplicaBatch& batch, double confidence) {
  const BatchCounts c = batch.counts();
  if (c.total() == 0) throw config_error("cannot estimate rho from an empty batch");

  RhoEstimate est;
  est.counts = c;
  const std::uint64_t decided = c.accepted + c.rejected;
  if (decided > 0) {
    est.rho_hat = static_cast<double>(c.accepted) / static_cast<double>(decided);
    est.ci = wilson_interval(c.accepted, decided, confidence);
  } else {
    est.rho_hat = 0.0;
    est.ci = {0.0, 1.0};
  }
  est.rho_low = static_cast<double>(c.accepted) / static_cast<double>(c.total());
  est.rho_high = static_cast<double>(c.accepted + c.ambiguous) / static_cast<double>(c.total());
  return est;
}

MuReport estimate_mu(const ReplicaBatch& batch, const Point& direction,
                     const std::vector<int>& n_list) {
  if (n_list.empty()) throw config_error("estimate_mu requires at least one n");

  MuReport report;
  report.direction = direction;
  for (int n : n_list) {
    if (n < 1) throw config_error("estimate_mu requires n >= 1");
    const SiteIndex site = resolve_site(*batch.lattice, scaled(direction, n));
    const int slot = batch.plan.hit_slot(site);
    if (slot < 0) throw config_error("site n*x is not tracked in this batch");

    MuEstimate est;
    est.n = n;
    double sum = 0.0, sum_sq = 0.0;
    std::uint64_t accepted = 0;
    for_accepted(batch, [&](const ReplicaRecord& r) {
      ++accepted;
      const double t = r.hit_times[static_cast<std::size_t>(slot)];
      if (!std::isfinite(t)) return;
      const double value = t / static_cast<double>(n);
      ++est.finite_count;
      sum += value;
      sum_sq += value * value;
    });
    if (accepted == 0) throw config_error("cannot estimate mu without accepted replicas");
    if (est.finite_count > 0) est.mu_hat = sum / static_cast<double>(est.finite_count);
    if (est.finite_count > 1) {
      const double k = static_cast<double>(est.finite_count);
      const double var = std::max(0.0, (sum_sq - sum * sum / k) / (k - 1.0));
      est.std_error = std::sqrt(var / k);
    }
    est.flagged_fraction =
        static_cast<double>(accepted - est.finite_count) / static_cast<double>(accepted);
    report.per_n.push_back(est);
  }

  if (report.per_n.size() >= 2) {
    auto by_n = report.per_n;
    std::sort(by_n.begin(), by_n.end(),
              [](const MuEstimate& a, const MuEstimate& b) { return a.n < b.n; });
    const MuEstimate& largest = by_n[by_n.size() - 1];
    const MuEstimate& second = by_n[by_n.size() - 2];
    if (largest.mu_hat != 0.0)
      report.drift_rel = std::abs(second.mu_hat - largest.mu_hat) / largest.mu_hat;
  }
  return report;
}

OrderStats theorem1_order_stats(const ReplicaBatch& batch, const Point& direction, int n,
                                double confidence) {
  if (n < 1) throw config_error("theorem1 statistics require n >= 1");

  std::vector<int> slots(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    const SiteIndex site = resolve_site(*batch.lattice, scaled(direction, k));
    slots[static_cast<std::size_t>(k)] = batch.plan.hit_slot(site);
    if (slots[static_cast<std::size_t>(k)] < 0)
      throw config_error("site k*x is not tracked in this batch");
  }

  OrderStats stats;
  stats.direction = direction;
  stats.n = n;
  std::vector<std::uint64_t> successes(static_cast<std::size_t>(n), 0);
  std::vector<std::uint64_t> flagged(static_cast<std::size_t>(n), 0);
  std::vector<double> sum_t(static_cast<std::size_t>(n), 0.0);
  std::vector<std::uint64_t> finite_t(static_cast<std::size_t>(n), 0);

  for_accepted(batch, [&](const ReplicaRecord& r) {
    ++stats.accepted;
    for (int k = 1; k <= n; ++k) {
      const double prev = r.hit_times[static_cast<std::size_t>(slots[static_cast<std::size_t>(k - 1)])];
      const double curr = r.hit_times[static_cast<std::size_t>(slots[static_cast<std::size_t>(k)])];
      // Censored times are +inf: a censored later site still counts as
      // correctly ordered; the pair is flagged either way.
      if (prev <= curr) ++successes[static_cast<std::size_t>(k - 1)];
      if (!std::isfinite(prev) || !std::isfinite(curr)) ++flagged[static_cast<std::size_t>(k - 1)];
      if (std::isfinite(curr)) {
        sum_t[static_cast<std::size_t>(k - 1)] += curr;
        ++finite_t[static_cast<std::size_t>(k - 1)];
      }
    }
  });
  if (stats.accepted == 0) throw config_error("no accepted replicas in batch");

  stats.p_hat.resize(static_cast<std::size_t>(n));
  stats.ci.resize(static_cast<std::size_t>(n));
  stats.mean_t.resize(static_cast<std::size_t>(n));
  stats.flagged_fraction.resize(static_cast<std::size_t>(n));
  double cesaro_sum = 0.0;
  double prev_mean = 0.0;  // t(o) = 0 exactly
  int increases = 0;
  for (int k = 1; k <= n; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    stats.p_hat[i] = static_cast<double>(successes[i]) / static_cast<double>(stats.accepted);
    stats.ci[i] = wilson_interval(successes[i], stats.accepted, confidence);
    stats.mean_t[i] = finite_t[i] > 0 ? sum_t[i] / static_cast<double>(finite_t[i])
                                      : std::numeric_limits<double>::quiet_NaN();
    stats.flagged_fraction[i] =
        static_cast<double>(flagged[i]) / static_cast<double>(stats.accepted);
    cesaro_sum += stats.p_hat[i];
    if (stats.mean_t[i] >= prev_mean) ++increases;
    prev_mean = stats.mean_t[i];
  }
  stats.cesaro = cesaro_sum / static_cast<double>(n);
  stats.increase_density = static_cast<double>(increases) / static_cast<double>(n);
  return stats;
}

MomentStats theorem2_moment_stats(const ReplicaBatch& batch,
                                  const std::vector<std::pair<Point, Point>>& pairs, double p,
                                  int bootstrap_resamples) {
  if (!(p > 0.0)) throw config_error("moment order p must be positive");
  if (pairs.empty()) throw config_error("theorem2 statistics require at least one pair");

  MomentStats stats;
  stats.p = p;

  const std::uint64_t accepted = batch.counts().accepted;
  if (accepted == 0) throw config_error("no accepted replicas in batch");

  // Per-pair per-accepted-replica moment samples (NaN marks a censored pair).
  std::vector<std::vector<double>> samples(pairs.size());
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto& [x, y] = pairs[pi];
    if (x == y) throw config_error("theorem2 pair with x = y is rejected");
    double dist = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dist += std::abs(static_cast<double>(x[i]) - y[i]);

    const int sx = batch.plan.hit_slot(resolve_site(*batch.lattice, x));
    const int sy = batch.plan.hit_slot(resolve_site(*batch.lattice, y));
    if (sx < 0 || sy < 0) throw config_error("pair site is not tracked in this batch");

    PairMomentStat pair_stat;
    pair_stat.x = x;
    pair_stat.y = y;
    pair_stat.distance = dist;
    samples[pi].reserve(accepted);
    double sum = 0.0;
    for_accepted(batch, [&](const ReplicaRecord& r) {
      const double tx = r.hit_times[static_cast<std::size_t>(sx)];
      const double ty = r.hit_times[static_cast<std::size_t>(sy)];
      if (std::isfinite(tx) && std::isfinite(ty)) {
        const double m = std::pow(std::abs(tx - ty), p);
        samples[pi].push_back(m);
        sum += m;
        ++pair_stat.finite_count;
      } else {
        samples[pi].push_back(std::numeric_limits<double>::quiet_NaN());
      }
    });

    const double scale = std::pow(dist, p);
    if (pair_stat.finite_count > 0)
      pair_stat.ratio = sum / static_cast<double>(pair_stat.finite_count) / scale;
    pair_stat.flagged_fraction =
        static_cast<double>(accepted - pair_stat.finite_count) / static_cast<double>(accepted);

    CounterStream boot(StreamId(batch.root_seed)
                           .with(kBootstrapStream)
                           .with(0x7431)  // theorem2 pair statistics
                           .with(pi));
    const auto& vals = samples[pi];
    pair_stat.bootstrap_ci = bootstrap_interval(
        vals.size(), bootstrap_resamples, boot, [&](std::span<const std::size_t> idx) {
          double s = 0.0;
          std::uint64_t k = 0;
          for (std::size_t i : idx)
            if (std::isfinite(vals[i])) {
              s += vals[i];
              ++k;
            }
          return k > 0 ? s / static_cast<double>(k) / scale
                       : std::numeric_limits<double>::quiet_NaN();
        });
    stats.pairs.push_back(std::move(pair_stat));
  }

  // Distance aggregates pool the samples of all pairs at one distance.
  std::vector<double> distances;
  for (const auto& ps : stats.pairs) distances.push_back(ps.distance);
  std::sort(distances.begin(), distances.end());
  distances.erase(std::unique(distances.begin(), distances.end()), distances.end());

  for (double dist : distances) {
    DistanceAggregate agg;
    agg.distance = dist;
    const double scale = std::pow(dist, p);

    std::vector<std::size_t> members;
    for (std::size_t pi = 0; pi < pairs.size(); ++pi)
      if (stats.pairs[pi].distance == dist) members.push_back(pi);

    double sum = 0.0;
    for (std::size_t pi : members) {
      for (double v : samples[pi])
        if (std::isfinite(v)) {
          sum += v;
          ++agg.samples;
        }
    }
    if (agg.samples > 0) agg.ratio = sum / static_cast<double>(agg.samples) / scale;

    CounterStream boot(StreamId(batch.root_seed)
                           .with(kBootstrapStream)
                           .with(0x7432)  // theorem2 distance aggregates
                           .with(std::bit_cast<std::uint64_t>(dist)));
    agg.bootstrap_ci = bootstrap_interval(
        static_cast<std::size_t>(accepted), bootstrap_resamples, boot,
        [&](std::span<const std::size_t> idx) {
          double s = 0.0;
          std::uint64_t k = 0;
          for (std::size_t i : idx)
            for (std::size_t pi : members) {
              const double v = samples[pi][i];
              if (std::isfinite(v)) {
                s += v;
                ++k;
              }
            }
          return k > 0 ? s / static_cast<double>(k) / scale
                       : std::numeric_limits<double>::quiet_NaN();
        });
    stats.by_distance.push_back(agg);
  }
  return stats;
}

namespace {

// Slope of log(-log q) against log L over usable grid points.
std::optional<double> fit_gamma(const std::vector<double>& l_grid, const std::vector<double>& q,
                                const std::vector<std::uint64_t>& exceed,
                                std::uint64_t min_exceed) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < l_grid.size(); ++i) {
    if (l_grid[i] <= 0.0) continue;
    if (!(q[i] > 0.0 && q[i] < 1.0)) continue;
    if (exceed[i] < min_exceed) continue;
    xs.push_back(std::log(l_grid[i]));
    ys.push_back(std::log(-std::log(q[i])));
  }
  if (xs.size() < 2) return std::nullopt;
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

}  // namespace

TailCurve sigma_gap_tail(const ReplicaBatch& batch, const std::vector<Point>& sites,
                         const std::vector<double>& l_grid, int bootstrap_resamples) {
  if (sites.empty()) throw config_error("sigma tail requires at least one site");
  if (l_grid.empty()) throw config_error("sigma tail requires a nonempty L grid");
  for (std::size_t i = 0; i < l_grid.size(); ++i) {
    if (l_grid[i] < 0.0) throw config_error("L grid entries must be nonnegative");
    if (i > 0 && l_grid[i] <= l_grid[i - 1]) throw config_error("L grid must be increasing");
  }

  std::vector<int> slots;
  for (const auto& p : sites) {
    const int slot = batch.plan.essential_slot(resolve_site(*batch.lattice, p));
    if (slot < 0) throw config_error("site has no essential records in this batch");
    slots.push_back(slot);
  }

  TailCurve curve;
  curve.sites = sites;
  curve.l_grid = l_grid;

  // Gap observations per accepted replica (one entry per defined site record),
  // kept per replica for replica-level bootstrapping.
  std::vector<std::vector<double>> replica_gaps;
  std::vector<std::vector<double>> site_gaps(sites.size());
  for_accepted(batch, [&](const ReplicaRecord& r) {
    std::vector<double> gaps;
    for (std::size_t si = 0; si < slots.size(); ++si) {
      const auto& rec = r.essentials[static_cast<std::size_t>(slots[si])];
      if (!rec.sigma_defined) {
        ++curve.excluded;
        continue;
      }
      const double gap = rec.sigma - rec.first_hit;
      gaps.push_back(gap);
      site_gaps[si].push_back(gap);
      ++curve.samples;
    }
    replica_gaps.push_back(std::move(gaps));
  });
  if (curve.samples == 0)
    throw fit_undefined_error("no sigma gap samples; every record was censored");

  const auto grid_n = l_grid.size();
  curve.pooled_q.resize(grid_n);
  curve.pooled_ci.resize(grid_n);
  curve.pooled_exceed.resize(grid_n);
  curve.site_q.assign(sites.size(), std::vector<double>(grid_n, 0.0));
  curve.site_ci.assign(sites.size(), std::vector<Interval>(grid_n));

  for (std::size_t li = 0; li < grid_n; ++li) {
    std::uint64_t exceed = 0;
    for (const auto& gaps : replica_gaps)
      for (double g : gaps)
        if (g > l_grid[li]) ++exceed;
    curve.pooled_exceed[li] = exceed;
    curve.pooled_q[li] = static_cast<double>(exceed) / static_cast<double>(curve.samples);
    curve.pooled_ci[li] = wilson_interval(exceed, curve.samples, 0.95);

    for (std::size_t si = 0; si < sites.size(); ++si) {
      if (site_gaps[si].empty()) {
        curve.site_q[si][li] = std::numeric_limits<double>::quiet_NaN();
        curve.site_ci[si][li] = {std::nan(""), std::nan("")};
        continue;
      }
      std::uint64_t site_exceed = 0;
      for (double g : site_gaps[si])
        if (g > l_grid[li]) ++site_exceed;
      curve.site_q[si][li] =
          static_cast<double>(site_exceed) / static_cast<double>(site_gaps[si].size());
      curve.site_ci[si][li] = wilson_interval(site_exceed, site_gaps[si].size(), 0.95);
    }
  }

  constexpr std::uint64_t kMinExceed = 10;  // variance control for the fit
  const auto gamma = fit_gamma(l_grid, curve.pooled_q, curve.pooled_exceed, kMinExceed);
  if (!gamma)
    throw fit_undefined_error("tail exponent fit has fewer than two usable grid points");
  curve.gamma_hat = *gamma;
  for (std::size_t li = 0; li < grid_n; ++li) {
    if (l_grid[li] <= 0.0 || !(curve.pooled_q[li] > 0.0 && curve.pooled_q[li] < 1.0)) continue;
    if (curve.pooled_exceed[li] < kMinExceed) continue;
    ++curve.fit_points;
  }

  CounterStream boot(StreamId(batch.root_seed).with(kBootstrapStream).with(0x7A69));
  curve.gamma_bootstrap_ci = bootstrap_interval(
      replica_gaps.size(), bootstrap_resamples, boot, [&](std::span<const std::size_t> idx) {
        std::vector<double> q(grid_n, 0.0);
        std::vector<std::uint64_t> exceed(grid_n, 0);
        std::uint64_t total = 0;
        for (std::size_t i : idx) total += replica_gaps[i].size();
        if (total == 0) return std::numeric_limits<double>::quiet_NaN();
        for (std::size_t li = 0; li < grid_n; ++li) {
          for (std::size_t i : idx)
            for (double g : replica_gaps[i])
              if (g > l_grid[li]) ++exceed[li];
          q[li] = static_cast<double>(exceed[li]) / static_cast<double>(total);
        }
        const auto slope = fit_gamma(l_grid, q, exceed, kMinExceed);
        return slope ? *slope : std::numeric_limits<double>::quiet_NaN();
      });
  return curve;
}

}  // namespace contactkit::stats
