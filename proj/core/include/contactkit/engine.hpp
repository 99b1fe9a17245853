#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "contactkit/event_log.hpp"
#include "contactkit/lattice.hpp"

namespace contactkit::engine {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Sparse set of infected sites at a timestamp. Sites are kept sorted.
struct ConfigurationSet {
  std::vector<SiteIndex> sites;
  double timestamp = 0.0;

  static ConfigurationSet single(SiteIndex site, double time = 0.0) {
    return {{site}, time};
  }
  static ConfigurationSet of(std::vector<SiteIndex> sites, double time = 0.0);

  bool contains(SiteIndex site) const;
  bool empty() const { return sites.empty(); }
  std::size_t size() const { return sites.size(); }

  bool is_subset_of(const ConfigurationSet& other) const;
  friend bool operator==(const ConfigurationSet& a, const ConfigurationSet& b) {
    return a.sites == b.sites;
  }
};

ConfigurationSet set_union(const ConfigurationSet& a, const ConfigurationSet& b);

/// Maximal time span during which a tracked site stays infected. `end` is the
/// closing recovery time, or +inf when the site is still infected at the end
/// of the sweep window. Infection holds on the half-open span [begin, end).
struct InfectionSpan {
  double begin;
  double end;
};

/// What a sweep should record beyond the final configuration.
struct TraceRequest {
  double start_time = 0.0;
  double end_time = 0.0;
  bool record_first_hits = false;
  std::span<const SiteIndex> span_sites = {};  // record InfectionSpans for these
};

struct TraceResult {
  bool died = false;
  double death_time = kInf;      // time of the event that emptied the set
  bool boundary_contact = false; // some infected site reached |x|_1 == M
  ConfigurationSet final_config;
  std::vector<double> first_hit;                    // per site; only if requested
  std::vector<std::vector<InfectionSpan>> spans;    // aligned with span_sites
};

/// Single merged time sweep of the log over (start_time, end_time], from the
/// given initial set. All engine queries are built on this primitive.
TraceResult run_trace(const EventLog& log, const ConfigurationSet& initial,
                      const TraceRequest& request);

/// State of the coupled process started from A (at A.timestamp) at time t.
/// Throws horizon_error when t exceeds the log horizon and ordering_error when
/// t precedes A's timestamp.
ConfigurationSet evolve(const EventLog& log, const ConfigurationSet& initial, double t);

/// True iff an infection path (x, s) leads to (y, t) in the log.
bool reachable(const EventLog& log, SiteIndex x, double s, SiteIndex y, double t);

struct ExtinctionResult {
  bool censored = false;      // still alive at the horizon
  double time = kInf;         // death time when not censored
  bool boundary_contact = false;
};

/// Death time of the process started from {x} at time s, or censored when it
/// is still alive at the horizon. Boundary contact is flagged separately.
ExtinctionResult extinction_time(const EventLog& log, SiteIndex x, double s);

}  // namespace contactkit::engine
