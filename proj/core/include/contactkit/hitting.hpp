#pragma once

#include <optional>
#include <span>
#include <vector>

#include "contactkit/engine.hpp"

namespace contactkit::hitting {

using engine::ConfigurationSet;
using engine::EventLog;
using engine::kInf;
using engine::SiteIndex;

/// First infection times t_A(x) for a set of tracked sites, from one sweep of
/// the log. t_A(x) = 0 exactly for x in A; +inf marks sites never infected
/// before the horizon.
struct HittingRecord {
  ConfigurationSet initial;
  std::vector<SiteIndex> sites;
  std::vector<double> times;  // aligned with sites
  double horizon = 0.0;

  double time_of(SiteIndex site) const;

  /// Once-infected tracked sites at time t (thresholding gives H_t).
  std::vector<SiteIndex> hit_by(double t) const;
};

HittingRecord hitting_times(const EventLog& log, const ConfigurationSet& initial,
                            std::span<const SiteIndex> tracked);

/// Outcome of the u/v renewal recursion at one site.
///
/// u_{k+1} is the first time >= v_k at which the site is infected by the
/// global process; v_{k+1} is the death time of the process restarted from the
/// site at u_{k+1}. The recursion ends when a restarted process is still alive
/// at the horizon (sigma = that u; the survival proxy), when the global
/// process died and the site is never hit again (global_death / never_hit), or
/// when the horizon is exhausted with the global process still alive and no
/// further hit observed (branch_censored; the record is ambiguous).
struct EssentialRecord {
  SiteIndex site = engine::kNoSite;
  std::vector<double> u;  // hitting times found, strictly increasing
  std::vector<double> v;  // finite death times of restarted processes

  bool sigma_defined = false;
  double sigma = kInf;     // u.back() when defined
  int renewal_count = 0;   // K; number of u entries when sigma is defined
  double first_hit = kInf; // u_1, or +inf when never hit in the window

  bool branch_censored = false;
  bool boundary_contact = false;
  bool never_hit = false;
  bool global_death = false;
};

/// Runs the recursion for `site` on the process started from `initial` at time
/// 0. Requires the origin to be in the initial set; throws precondition_error
/// otherwise. `restart_time` sets v_0 (0 for the standard definition); the
/// suffix of the recursion restarted at any finite v_k reproduces the original
/// suffix on the same log.
EssentialRecord essential_hitting(const EventLog& log, const ConfigurationSet& initial,
                                  SiteIndex site, double restart_time = 0.0);

/// Same recursion on a precomputed global trace (spans for `site` plus the
/// trace's death/boundary outcome), avoiding a fresh global sweep.
EssentialRecord essential_from_trace(const EventLog& log, const engine::TraceResult& global_trace,
                                     std::span<const engine::InfectionSpan> spans, SiteIndex site,
                                     double restart_time = 0.0);

enum class Verdict { SURVIVES, DIES, AMBIGUOUS };

struct SurvivalVerdict {
  Verdict verdict = Verdict::AMBIGUOUS;
  std::optional<double> extinction_time;  // set when the process died
  std::size_t alive_at_horizon = 0;       // infected sites at T when it survived
  bool boundary_contact = false;
};

enum class ProxyMode { Horizon };

/// Horizon-based survival proxy for the process started from {x} at time s:
/// SURVIVES when still alive at T; AMBIGUOUS when it died after contacting the
/// box boundary (death could be a killing artifact); DIES otherwise.
SurvivalVerdict survival_proxy(const EventLog& log, SiteIndex x, double s,
                               ProxyMode mode = ProxyMode::Horizon);

/// Verdict classification of an already-run trace over (s, T].
SurvivalVerdict classify_trace(const engine::TraceResult& trace);

const char* to_string(Verdict v);

}  // namespace contactkit::hitting
