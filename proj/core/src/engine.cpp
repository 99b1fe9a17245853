#include "contactkit/engine.hpp"

#include <algorithm>

#include "contactkit/errors.hpp"

namespace contactkit::engine {

ConfigurationSet ConfigurationSet::of(std::vector<SiteIndex> sites, double time) {
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  return {std::move(sites), time};
}

bool ConfigurationSet::contains(SiteIndex site) const {
  return std::binary_search(sites.begin(), sites.end(), site);
}

bool ConfigurationSet::is_subset_of(const ConfigurationSet& other) const {
  return std::includes(other.sites.begin(), other.sites.end(), sites.begin(), sites.end());
}

ConfigurationSet set_union(const ConfigurationSet& a, const ConfigurationSet& b) {
  ConfigurationSet out;
  out.timestamp = a.timestamp;
  out.sites.reserve(a.sites.size() + b.sites.size());
  std::set_union(a.sites.begin(), a.sites.end(), b.sites.begin(), b.sites.end(),
                 std::back_inserter(out.sites));
  return out;
}

TraceResult run_trace(const EventLog& log, const ConfigurationSet& initial,
                      const TraceRequest& request) {
  const Lattice& lat = log.lattice();
  const auto n = static_cast<std::size_t>(lat.site_count());

  TraceResult result;
  std::vector<std::uint8_t> infected(n, 0);
  std::size_t alive = 0;

  // Map from site to its slot in request.span_sites, kNoSite elsewhere.
  std::vector<SiteIndex> span_slot;
  if (!request.span_sites.empty()) {
    span_slot.assign(n, kNoSite);
    result.spans.resize(request.span_sites.size());
    for (std::size_t i = 0; i < request.span_sites.size(); ++i)
      span_slot[request.span_sites[i]] = static_cast<SiteIndex>(i);
  }
  if (request.record_first_hits) result.first_hit.assign(n, kInf);

  auto infect = [&](SiteIndex site, double time) {
    if (infected[site]) return;
    infected[site] = 1;
    ++alive;
    if (lat.on_boundary(site)) result.boundary_contact = true;
    if (request.record_first_hits && result.first_hit[site] == kInf)
      result.first_hit[site] = time;
    if (!span_slot.empty() && span_slot[site] != kNoSite)
      result.spans[span_slot[site]].push_back({time, kInf});
  };

  for (SiteIndex s : initial.sites) {
    if (s < 0 || s >= lat.site_count()) throw config_error("initial site outside the lattice");
    infect(s, request.start_time);
  }

  const auto events = log.events();
  std::size_t i = log.first_event_after(request.start_time);
  for (; i < events.size() && alive > 0; ++i) {
    const Event& e = events[i];
    if (e.time > request.end_time) break;
    if (e.is_recovery()) {
      if (infected[e.site]) {
        infected[e.site] = 0;
        --alive;
        if (!span_slot.empty() && span_slot[e.site] != kNoSite)
          result.spans[span_slot[e.site]].back().end = e.time;
        if (alive == 0) {
          result.died = true;
          result.death_time = e.time;
        }
      }
    } else if (infected[e.source]) {
      infect(e.site, e.time);
    }
  }

  result.final_config.timestamp = request.end_time;
  result.final_config.sites.reserve(alive);
  if (alive > 0) {
    for (std::size_t s = 0; s < n; ++s)
      if (infected[s]) result.final_config.sites.push_back(static_cast<SiteIndex>(s));
  }
  return result;
}

ConfigurationSet evolve(const EventLog& log, const ConfigurationSet& initial, double t) {
  if (t > log.horizon()) throw horizon_error("evolve time exceeds the log horizon");
  if (t < initial.timestamp) throw ordering_error("evolve time precedes the configuration time");
  TraceRequest request;
  request.start_time = initial.timestamp;
  request.end_time = t;
  return run_trace(log, initial, request).final_config;
}

bool reachable(const EventLog& log, SiteIndex x, double s, SiteIndex y, double t) {
  if (s > t) throw ordering_error("reachable requires s <= t");
  if (t > log.horizon()) throw horizon_error("reachable time exceeds the log horizon");
  return evolve(log, ConfigurationSet::single(x, s), t).contains(y);
}

ExtinctionResult extinction_time(const EventLog& log, SiteIndex x, double s) {
  if (s > log.horizon()) throw horizon_error("seed time exceeds the log horizon");
  TraceRequest request;
  request.start_time = s;
  request.end_time = log.horizon();
  TraceResult trace = run_trace(log, ConfigurationSet::single(x, s), request);
  ExtinctionResult out;
  out.boundary_contact = trace.boundary_contact;
  if (trace.died) {
    out.time = trace.death_time;
  } else {
    out.censored = true;
  }
  return out;
}

}  // namespace contactkit::engine
