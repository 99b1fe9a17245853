#include "contactkit/event_log.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "contactkit/errors.hpp"

namespace contactkit::engine {

RateSpec RateSpec::uniform(double lambda) {
  if (lambda < 0.0) throw config_error("infection rate must be nonnegative");
  RateSpec r;
  r.mode = Mode::Uniform;
  r.lambda = lambda;
  return r;
}

RateSpec RateSpec::environment(double lambda_min, double lambda_max, std::uint64_t env_seed) {
  if (lambda_min < 0.0 || lambda_max < lambda_min)
    throw config_error("environment rates require 0 <= lambda_min <= lambda_max");
  RateSpec r;
  r.mode = Mode::Environment;
  r.lambda_min = lambda_min;
  r.lambda_max = lambda_max;
  r.env_seed = env_seed;
  return r;
}

std::uint64_t point_stream_word(std::span<const std::int32_t> point) {
  std::uint64_t w = mix64(static_cast<std::uint64_t>(point.size()) + kGoldenGamma);
  for (auto c : point)
    w = mix64((w + kGoldenGamma) ^ mix64(static_cast<std::uint64_t>(static_cast<std::int64_t>(c))));
  return w;
}

namespace {

// Poisson arrival times in (0, T], strictly increasing.
void sample_arrivals(CounterStream stream, double rate, double horizon, std::vector<double>& out) {
  out.clear();
  if (rate <= 0.0) return;
  double t = stream.next_exponential(rate);
  while (t <= horizon) {
    out.push_back(t);
    t += stream.next_exponential(rate);
  }
}

// Environment rate of the undirected edge through (site, direction), keyed by
// the lexicographically smaller endpoint and the axis so both directions and
// any box size agree.
double environment_rate(const Lattice& lattice, const RateSpec& rates, SiteIndex site,
                        int direction) {
  const int axis = direction / 2;
  Point a = lattice.point(site);
  Point b = lattice.neighbor_point(site, direction);
  const Point& key = std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()) ? a : b;
  StreamId id = StreamId(rates.env_seed).with(kEdgeRateStream).with(point_stream_word(key)).with(
      static_cast<std::uint64_t>(axis));
  CounterStream stream(id);
  return rates.lambda_min + stream.next_unit() * (rates.lambda_max - rates.lambda_min);
}

}  // namespace

EventLog EventLog::generate(LatticePtr lattice, const RateSpec& rates, double horizon,
                            std::uint64_t root_seed, std::uint64_t replica_id) {
  if (horizon <= 0.0) throw config_error("horizon must be positive");

  EventLog log;
  log.lattice_ = std::move(lattice);
  log.horizon_ = horizon;
  log.root_seed_ = root_seed;
  log.replica_id_ = replica_id;
  log.rates_ = rates;

  const Lattice& lat = *log.lattice_;
  const auto n = static_cast<std::size_t>(lat.site_count());
  const int dirs = lat.directions();

  log.recoveries_.resize(n);
  log.arrows_.resize(n * static_cast<std::size_t>(dirs));
  if (rates.mode == RateSpec::Mode::Environment)
    log.env_rates_.resize(n * static_cast<std::size_t>(dirs));

  const StreamId replica_base = StreamId(root_seed).with(replica_id);
  for (std::size_t i = 0; i < n; ++i) {
    const auto site = static_cast<SiteIndex>(i);
    const std::uint64_t site_word = point_stream_word(lat.coordinates(site));
    sample_arrivals(CounterStream(replica_base.with(kRecoveryStream).with(site_word)), 1.0, horizon,
                    log.recoveries_[i]);
    for (int j = 0; j < dirs; ++j) {
      const double rate = (rates.mode == RateSpec::Mode::Uniform)
                              ? rates.lambda
                              : environment_rate(lat, rates, site, j);
      if (rates.mode == RateSpec::Mode::Environment)
        log.env_rates_[i * static_cast<std::size_t>(dirs) + j] = rate;
      if (lat.neighbor(site, j) == kNoSite) continue;  // killed arrows never land
      sample_arrivals(
          CounterStream(replica_base.with(kArrowStream).with(site_word).with(
              static_cast<std::uint64_t>(j))),
          rate, horizon, log.arrows_[i * static_cast<std::size_t>(dirs) + j]);
    }
  }

  log.build_merged();
  return log;
}

EventLog EventLog::from_events(LatticePtr lattice, double horizon,
                               std::vector<std::vector<double>> recoveries_per_site,
                               std::vector<std::tuple<SiteIndex, SiteIndex, double>> arrows) {
  if (horizon <= 0.0) throw config_error("horizon must be positive");

  EventLog log;
  log.lattice_ = std::move(lattice);
  log.horizon_ = horizon;
  log.rates_ = RateSpec::uniform(0.0);

  const Lattice& lat = *log.lattice_;
  const auto n = static_cast<std::size_t>(lat.site_count());
  const int dirs = lat.directions();

  recoveries_per_site.resize(n);
  log.recoveries_ = std::move(recoveries_per_site);
  for (auto& list : log.recoveries_) std::sort(list.begin(), list.end());

  log.arrows_.resize(n * static_cast<std::size_t>(dirs));
  for (const auto& [source, target, time] : arrows) {
    int dir = -1;
    for (int j = 0; j < dirs; ++j)
      if (lat.neighbor(source, j) == target) dir = j;
    if (dir < 0) throw config_error("handcrafted arrow target is not an in-box neighbor");
    log.arrows_[static_cast<std::size_t>(source) * dirs + dir].push_back(time);
  }
  for (auto& list : log.arrows_) std::sort(list.begin(), list.end());

  log.build_merged();
  return log;
}

void EventLog::build_merged() {
  const Lattice& lat = *lattice_;
  const int dirs = lat.directions();

  std::size_t total = 0;
  for (const auto& r : recoveries_) total += r.size();
  for (const auto& a : arrows_) total += a.size();

  merged_.clear();
  merged_.reserve(total);
  for (SiteIndex s = 0; s < lat.site_count(); ++s) {
    for (double t : recoveries_[s]) merged_.push_back({t, s, kNoSite});
    for (int j = 0; j < dirs; ++j) {
      const SiteIndex target = lat.neighbor(s, j);
      if (target == kNoSite) continue;
      for (double t : arrows(s, j)) merged_.push_back({t, target, s});
    }
  }
  std::sort(merged_.begin(), merged_.end(), event_order);
}

double EventLog::edge_rate(SiteIndex site, int direction) const {
  if (rates_.mode == RateSpec::Mode::Uniform) return rates_.lambda;
  return env_rates_[static_cast<std::size_t>(site) * lattice_->directions() + direction];
}

std::size_t EventLog::first_event_after(double t) const {
  auto it = std::upper_bound(merged_.begin(), merged_.end(), t,
                             [](double value, const Event& e) { return value < e.time; });
  return static_cast<std::size_t>(it - merged_.begin());
}

}  // namespace contactkit::engine
