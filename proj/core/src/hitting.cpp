#include "contactkit/hitting.hpp"

#include <algorithm>

#include "contactkit/errors.hpp"

namespace contactkit::hitting {

double HittingRecord::time_of(SiteIndex site) const {
  for (std::size_t i = 0; i < sites.size(); ++i)
    if (sites[i] == site) return times[i];
  throw config_error("site is not tracked in this hitting record");
}

std::vector<SiteIndex> HittingRecord::hit_by(double t) const {
  std::vector<SiteIndex> out;
  for (std::size_t i = 0; i < sites.size(); ++i)
    if (times[i] <= t) out.push_back(sites[i]);
  return out;
}

HittingRecord hitting_times(const EventLog& log, const ConfigurationSet& initial,
                            std::span<const SiteIndex> tracked) {
  if (initial.empty()) throw precondition_error("initial set must be nonempty");

  engine::TraceRequest request;
  request.start_time = initial.timestamp;
  request.end_time = log.horizon();
  request.record_first_hits = true;
  engine::TraceResult trace = engine::run_trace(log, initial, request);

  HittingRecord record;
  record.initial = initial;
  record.horizon = log.horizon();
  record.sites.assign(tracked.begin(), tracked.end());
  record.times.reserve(tracked.size());
  for (SiteIndex s : tracked) record.times.push_back(trace.first_hit[s]);
  return record;
}

EssentialRecord essential_from_trace(const EventLog& log, const engine::TraceResult& global_trace,
                                     std::span<const engine::InfectionSpan> spans, SiteIndex site,
                                     double restart_time) {
  EssentialRecord rec;
  rec.site = site;
  rec.boundary_contact = global_trace.boundary_contact;

  double resume = restart_time;  // v_k of the previous round
  std::size_t span_pos = 0;
  while (true) {
    while (span_pos < spans.size() && spans[span_pos].end <= resume) ++span_pos;
    if (span_pos == spans.size()) {
      // No further infection of the site within (resume, T].
      if (global_trace.died) {
        rec.global_death = true;
        rec.never_hit = rec.u.empty();
      } else {
        rec.branch_censored = true;  // global process alive; the next u is unknowable
      }
      return rec;
    }

    const double u_next = std::max(spans[span_pos].begin, resume);
    rec.u.push_back(u_next);
    if (rec.first_hit == kInf) rec.first_hit = u_next;

    engine::ExtinctionResult branch = engine::extinction_time(log, site, u_next);
    if (branch.boundary_contact) rec.boundary_contact = true;
    if (branch.censored) {
      rec.sigma_defined = true;
      rec.sigma = u_next;
      rec.renewal_count = static_cast<int>(rec.u.size());
      return rec;
    }
    rec.v.push_back(branch.time);
    resume = branch.time;
  }
}

EssentialRecord essential_hitting(const EventLog& log, const ConfigurationSet& initial,
                                  SiteIndex site, double restart_time) {
  if (!initial.contains(log.lattice().origin()))
    throw precondition_error("essential hitting requires the origin in the initial set");

  const SiteIndex sites[] = {site};
  engine::TraceRequest request;
  request.start_time = initial.timestamp;
  request.end_time = log.horizon();
  request.span_sites = sites;
  engine::TraceResult trace = engine::run_trace(log, initial, request);
  return essential_from_trace(log, trace, trace.spans[0], site, restart_time);
}

SurvivalVerdict classify_trace(const engine::TraceResult& trace) {
  SurvivalVerdict out;
  out.boundary_contact = trace.boundary_contact;
  if (!trace.died) {
    out.verdict = Verdict::SURVIVES;
    out.alive_at_horizon = trace.final_config.size();
  } else {
    out.extinction_time = trace.death_time;
    out.verdict = trace.boundary_contact ? Verdict::AMBIGUOUS : Verdict::DIES;
  }
  return out;
}

SurvivalVerdict survival_proxy(const EventLog& log, SiteIndex x, double s, ProxyMode) {
  if (s > log.horizon()) throw horizon_error("seed time exceeds the log horizon");
  engine::TraceRequest request;
  request.start_time = s;
  request.end_time = log.horizon();
  engine::TraceResult trace = engine::run_trace(log, ConfigurationSet::single(x, s), request);
  return classify_trace(trace);
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::SURVIVES: return "SURVIVES";
    case Verdict::DIES: return "DIES";
    case Verdict::AMBIGUOUS: return "AMBIGUOUS";
  }
  return "UNKNOWN";
}

}  // namespace contactkit::hitting
