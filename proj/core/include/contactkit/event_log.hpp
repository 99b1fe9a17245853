#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "contactkit/lattice.hpp"
#include "contactkit/rng.hpp"

namespace contactkit::engine {

/// Infection rates. Recovery rate is fixed at 1. Uniform mode assigns the same
/// rate lambda to every directed edge; environment mode draws one rate per
/// undirected edge, i.i.d. uniform on [lambda_min, lambda_max], from a
/// dedicated environment seed, and uses it for both directions.
struct RateSpec {
  enum class Mode { Uniform, Environment };

  Mode mode = Mode::Uniform;
  double lambda = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  std::uint64_t env_seed = 0;

  static RateSpec uniform(double lambda);
  static RateSpec environment(double lambda_min, double lambda_max, std::uint64_t env_seed);
};

/// One time-stamped change of the graphical representation. `source == kNoSite`
/// marks a recovery at `site`; otherwise the event is a transmission arrow
/// source -> site.
struct Event {
  double time;
  SiteIndex site;
  SiteIndex source;

  bool is_recovery() const { return source == kNoSite; }
};

/// Deterministic total order on events: time, then event identity. Ties in
/// time have measure zero for generated logs but the order must stay total so
/// replays are reproducible bit for bit.
inline bool event_order(const Event& a, const Event& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.source != b.source) return a.source < b.source;
  return a.site < b.site;
}

/// Harris construction of one replica on a finite box: per-site recovery marks
/// (Poisson rate 1) and per-directed-edge transmission arrows (Poisson at the
/// edge rate), all within (0, T]. Immutable after construction and safe to
/// share read-only across threads.
///
/// Each object's marks come from its own counter-based stream keyed by
/// (root_seed, replica_id, kind, coordinates), so regenerating with a larger
/// box or horizon reproduces every existing event exactly.
class EventLog {
 public:
  static EventLog generate(LatticePtr lattice, const RateSpec& rates, double horizon,
                           std::uint64_t root_seed, std::uint64_t replica_id);

  /// Explicit construction for handcrafted logs in tests. `arrows` entries are
  /// (source, target, time); targets must be in-box neighbors of their source.
  static EventLog from_events(LatticePtr lattice, double horizon,
                              std::vector<std::vector<double>> recoveries_per_site,
                              std::vector<std::tuple<SiteIndex, SiteIndex, double>> arrows);

  const Lattice& lattice() const { return *lattice_; }
  LatticePtr lattice_ptr() const { return lattice_; }
  double horizon() const { return horizon_; }
  std::uint64_t root_seed() const { return root_seed_; }
  std::uint64_t replica_id() const { return replica_id_; }

  std::span<const double> recoveries(SiteIndex site) const { return recoveries_[site]; }

  /// Arrow times on the directed edge (site, direction); empty when the target
  /// is outside the box (killed arrows are never stored).
  std::span<const double> arrows(SiteIndex site, int direction) const {
    return arrows_[static_cast<std::size_t>(site) * lattice_->directions() + direction];
  }

  /// Rate of the directed edge (site, direction), regardless of whether the
  /// target is inside the box.
  double edge_rate(SiteIndex site, int direction) const;

  /// All events merged in (time, identity) order.
  std::span<const Event> events() const { return merged_; }

  /// Index of the first merged event with time > t.
  std::size_t first_event_after(double t) const;

 private:
  EventLog() = default;
  void build_merged();

  LatticePtr lattice_;
  double horizon_ = 0.0;
  std::uint64_t root_seed_ = 0;
  std::uint64_t replica_id_ = 0;
  RateSpec rates_;
  std::vector<std::vector<double>> recoveries_;  // per site
  std::vector<std::vector<double>> arrows_;      // per directed edge (site * 2d + dir)
  std::vector<double> env_rates_;                // per directed edge, Environment mode only
  std::vector<Event> merged_;
};

/// Stable stream word for a point, independent of any box.
std::uint64_t point_stream_word(std::span<const std::int32_t> point);

}  // namespace contactkit::engine
