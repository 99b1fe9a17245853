#include "contactkit/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "contactkit/errors.hpp"
#include "contactkit/stats.hpp"
#include "contactkit/version.hpp"

namespace contactkit::cli {

using nlohmann::json;

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Rho: return "rho";
    case ExperimentKind::Shape: return "shape";
    case ExperimentKind::Theorem1: return "theorem1";
    case ExperimentKind::Theorem2: return "theorem2";
    case ExperimentKind::SigmaTail: return "sigma-tail";
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_kind(const std::string& name) {
  if (name == "rho") return ExperimentKind::Rho;
  if (name == "shape") return ExperimentKind::Shape;
  if (name == "theorem1") return ExperimentKind::Theorem1;
  if (name == "theorem2") return ExperimentKind::Theorem2;
  if (name == "sigma-tail") return ExperimentKind::SigmaTail;
  return std::nullopt;
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream stream(s);
  while (std::getline(stream, item, delim)) out.push_back(trim(item));
  if (!s.empty() && s.back() == delim) out.push_back("");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string point_to_string(const engine::Point& p) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(p[i]);
  }
  return out;
}

int one_norm(const engine::Point& p) {
  int s = 0;
  for (auto c : p) s += std::abs(c);
  return s;
}

// Collects raw key/value pairs and converts on demand, recording problems
// instead of throwing so validate() can list everything at once.
class KvReader {
 public:
  KvReader(std::map<std::string, std::string> kv, std::vector<Violation>& issues)
      : kv_(std::move(kv)), issues_(issues) {}

  std::optional<std::string> take(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    consumed_.insert(key);
    return it->second;
  }

  template <typename T>
  void integer(const std::string& key, T& out) {
    auto raw = take(key);
    if (!raw) return;
    long long v = 0;
    auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
    if (ec != std::errc{} || ptr != raw->data() + raw->size())
      issues_.push_back({key, "not an integer: '" + *raw + "'"});
    else
      out = static_cast<T>(v);
  }

  void unsigned64(const std::string& key, std::uint64_t& out) {
    auto raw = take(key);
    if (!raw) return;
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
    if (ec != std::errc{} || ptr != raw->data() + raw->size())
      issues_.push_back({key, "not an unsigned integer: '" + *raw + "'"});
    else
      out = v;
  }

  void real(const std::string& key, double& out, bool* present = nullptr) {
    auto raw = take(key);
    if (!raw) return;
    if (present) *present = true;
    char* end = nullptr;
    const double v = std::strtod(raw->c_str(), &end);
    if (end != raw->c_str() + raw->size())
      issues_.push_back({key, "not a number: '" + *raw + "'"});
    else
      out = v;
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::optional<std::vector<int>> int_list(const std::string& key) {
    auto raw = take(key);
    if (!raw) return std::nullopt;
    std::vector<int> out;
    for (const auto& tok : split(*raw, ',')) {
      long long v = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        issues_.push_back({key, "not an integer list: '" + *raw + "'"});
        return std::nullopt;
      }
      out.push_back(static_cast<int>(v));
    }
    return out;
  }

  std::optional<std::vector<double>> real_list(const std::string& key) {
    auto raw = take(key);
    if (!raw) return std::nullopt;
    std::vector<double> out;
    for (const auto& tok : split(*raw, ',')) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (tok.empty() || end != tok.c_str() + tok.size()) {
        issues_.push_back({key, "not a number list: '" + *raw + "'"});
        return std::nullopt;
      }
      out.push_back(v);
    }
    return out;
  }

  void report_unknown() {
    for (const auto& [key, value] : kv_)
      if (!consumed_.count(key)) issues_.push_back({key, "unknown key"});
  }

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> consumed_;
  std::vector<Violation>& issues_;
};

engine::Point to_point(const std::vector<int>& v) {
  engine::Point p;
  p.reserve(v.size());
  for (int c : v) p.push_back(static_cast<std::int32_t>(c));
  return p;
}

}  // namespace

engine::RateSpec ExperimentConfig::rate_spec() const {
  if (environment_mode)
    return engine::RateSpec::environment(lambda_min, lambda_max, env_seed);
  return engine::RateSpec::uniform(lambda);
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) + " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw config_error("config line " + std::to_string(line_no) + " has an empty key");
    if (kv.count(key)) throw config_error("duplicate config key '" + key + "'");
    kv[key] = value;
  }

  ExperimentConfig cfg;
  KvReader reader(std::move(kv), cfg.parse_issues);

  if (auto kind = reader.take("kind")) {
    if (auto parsed = parse_kind(*kind))
      cfg.kind = *parsed;
    else
      cfg.parse_issues.push_back({"kind", "unknown experiment kind '" + *kind + "'"});
  } else {
    cfg.parse_issues.push_back({"kind", "missing"});
  }

  reader.integer("lattice.d", cfg.dimension);
  reader.integer("lattice.M", cfg.radius);
  bool has_lambda = false;
  reader.real("rates.lambda", cfg.lambda, &has_lambda);
  const bool has_env = reader.has("rates.lambda_min") || reader.has("rates.lambda_max");
  if (has_env) {
    cfg.environment_mode = true;
    reader.real("rates.lambda_min", cfg.lambda_min);
    reader.real("rates.lambda_max", cfg.lambda_max);
    reader.unsigned64("rates.env_seed", cfg.env_seed);
    if (has_lambda)
      cfg.parse_issues.push_back({"rates.lambda", "give either rates.lambda or the environment range, not both"});
  } else if (!has_lambda) {
    cfg.parse_issues.push_back({"rates.lambda", "missing"});
  }
  reader.real("horizon.T", cfg.horizon);
  reader.unsigned64("replicas.target", cfg.replica_target);
  reader.unsigned64("replicas.cap", cfg.attempt_cap);
  reader.unsigned64("seed.root", cfg.root_seed);
  if (auto dir = reader.take("output.dir")) cfg.output_dir = *dir;

  if (auto v = reader.int_list("shape.direction")) cfg.direction = to_point(*v);
  if (auto v = reader.int_list("shape.n_list")) cfg.n_list = *v;
  if (auto v = reader.int_list("theorem1.direction")) cfg.direction = to_point(*v);
  reader.integer("theorem1.n", cfg.order_n);
  if (auto raw = reader.take("theorem2.pairs")) {
    for (const auto& entry : split(*raw, ';')) {
      if (entry.empty()) continue;
      std::vector<int> nums;
      bool ok = true;
      for (const auto& tok : split(entry, ',')) {
        long long v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
          ok = false;
          break;
        }
        nums.push_back(static_cast<int>(v));
      }
      if (!ok || nums.empty() || nums.size() % 2 != 0) {
        cfg.parse_issues.push_back({"theorem2.pairs", "malformed pair '" + entry + "'"});
        continue;
      }
      const std::size_t half = nums.size() / 2;
      cfg.pairs.emplace_back(to_point({nums.begin(), nums.begin() + half}),
                             to_point({nums.begin() + half, nums.end()}));
    }
  }
  if (auto v = reader.real_list("theorem2.p_list")) cfg.p_list = *v;
  if (auto raw = reader.take("sigma_tail.sites")) {
    for (const auto& entry : split(*raw, ';')) {
      if (entry.empty()) continue;
      std::vector<int> nums;
      bool ok = true;
      for (const auto& tok : split(entry, ',')) {
        long long v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
          ok = false;
          break;
        }
        nums.push_back(static_cast<int>(v));
      }
      if (!ok || nums.empty()) {
        cfg.parse_issues.push_back({"sigma_tail.sites", "malformed site '" + entry + "'"});
        continue;
      }
      cfg.tail_sites.push_back(to_point(nums));
    }
  }
  if (auto v = reader.real_list("sigma_tail.l_grid")) cfg.l_grid = *v;

  reader.report_unknown();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read config file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_string(buffer.str());
}

std::vector<Violation> ExperimentConfig::validate() const {
  std::vector<Violation> out = parse_issues;
  auto add = [&](const std::string& key, const std::string& message) {
    out.push_back({key, message});
  };

  if (dimension < 1) add("lattice.d", "dimension must be >= 1");
  if (radius < 1) add("lattice.M", "box radius must be >= 1");
  if (environment_mode) {
    if (lambda_min < 0.0) add("rates.lambda_min", "must be nonnegative");
    if (lambda_max < lambda_min) add("rates.lambda_max", "must be >= rates.lambda_min");
  } else if (lambda < 0.0) {
    add("rates.lambda", "must be nonnegative");
  }
  if (!(horizon > 0.0)) add("horizon.T", "horizon must be positive");
  if (replica_target < 1) add("replicas.target", "must be >= 1");
  if (attempt_cap < replica_target) add("replicas.cap", "must be >= replicas.target");

  const auto check_point = [&](const std::string& key, const engine::Point& p) {
    if (static_cast<int>(p.size()) != dimension) {
      add(key, "needs exactly " + std::to_string(dimension) + " coordinates");
      return false;
    }
    return true;
  };
  const auto check_inside = [&](const std::string& key, const engine::Point& p) {
    if (one_norm(p) > radius)
      add(key, "site " + point_to_string(p) + " has 1-norm " + std::to_string(one_norm(p)) +
                   " exceeding box radius M = " + std::to_string(radius));
  };

  switch (kind) {
    case ExperimentKind::Rho:
      break;
    case ExperimentKind::Shape:
      if (direction.empty())
        add("shape.direction", "missing");
      else if (check_point("shape.direction", direction)) {
        if (n_list.empty()) add("shape.n_list", "missing or empty");
        for (int n : n_list) {
          if (n < 1) {
            add("shape.n_list", "entries must be >= 1");
            break;
          }
          engine::Point p(direction);
          for (auto& c : p) c *= n;
          check_inside("shape.n_list", p);
        }
      }
      break;
    case ExperimentKind::Theorem1:
      if (direction.empty())
        add("theorem1.direction", "missing");
      else if (check_point("theorem1.direction", direction)) {
        if (order_n < 1)
          add("theorem1.n", "must be >= 1");
        else {
          engine::Point p(direction);
          for (auto& c : p) c *= order_n;
          if (one_norm(p) > radius)
            add("theorem1.n", "n*|x| = " + std::to_string(one_norm(p)) +
                                  " exceeds box radius M = " + std::to_string(radius));
        }
      }
      break;
    case ExperimentKind::Theorem2:
      if (pairs.empty()) add("theorem2.pairs", "missing or empty");
      for (const auto& [x, y] : pairs) {
        if (!check_point("theorem2.pairs", x) || !check_point("theorem2.pairs", y)) break;
        check_inside("theorem2.pairs", x);
        check_inside("theorem2.pairs", y);
        if (x == y) add("theorem2.pairs", "pair with x = y is rejected");
      }
      if (p_list.empty()) add("theorem2.p_list", "missing or empty");
      for (double p : p_list)
        if (!(p > 0.0)) {
          add("theorem2.p_list", "moment orders must be positive");
          break;
        }
      break;
    case ExperimentKind::SigmaTail:
      if (tail_sites.empty()) add("sigma_tail.sites", "missing or empty");
      for (const auto& site : tail_sites) {
        if (!check_point("sigma_tail.sites", site)) break;
        check_inside("sigma_tail.sites", site);
      }
      if (l_grid.empty())
        add("sigma_tail.l_grid", "missing or empty");
      else {
        for (std::size_t i = 0; i < l_grid.size(); ++i) {
          if (l_grid[i] < 0.0) {
            add("sigma_tail.l_grid", "entries must be nonnegative");
            break;
          }
          if (i > 0 && l_grid[i] <= l_grid[i - 1]) {
            add("sigma_tail.l_grid", "must be strictly increasing");
            break;
          }
        }
      }
      break;
  }
  return out;
}

int resolve_threads(int requested) {
  if (const char* env = std::getenv("CONTACTKIT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  if (requested >= 1) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace {

json config_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = to_string(c.kind);
  j["lattice"] = {{"d", c.dimension}, {"M", c.radius}};
  if (c.environment_mode)
    j["rates"] = {{"lambda_min", c.lambda_min},
                  {"lambda_max", c.lambda_max},
                  {"env_seed", c.env_seed}};
  else
    j["rates"] = {{"lambda", c.lambda}};
  j["horizon"] = {{"T", c.horizon}};
  j["replicas"] = {{"target", c.replica_target}, {"cap", c.attempt_cap}};
  j["seed"] = {{"root", c.root_seed}};
  j["output"] = {{"dir", c.output_dir}};
  switch (c.kind) {
    case ExperimentKind::Rho:
      break;
    case ExperimentKind::Shape:
      j["shape"] = {{"direction", point_to_string(c.direction)}, {"n_list", c.n_list}};
      break;
    case ExperimentKind::Theorem1:
      j["theorem1"] = {{"direction", point_to_string(c.direction)}, {"n", c.order_n}};
      break;
    case ExperimentKind::Theorem2: {
      std::vector<std::string> pair_names;
      for (const auto& [x, y] : c.pairs)
        pair_names.push_back(point_to_string(x) + "|" + point_to_string(y));
      j["theorem2"] = {{"pairs", pair_names}, {"p_list", c.p_list}};
      break;
    }
    case ExperimentKind::SigmaTail: {
      std::vector<std::string> site_names;
      for (const auto& s : c.tail_sites) site_names.push_back(point_to_string(s));
      j["sigma_tail"] = {{"sites", site_names}, {"l_grid", c.l_grid}};
      break;
    }
  }
  return j;
}

json interval_json(const stats::Interval& ci) {
  json j;
  j["lo"] = std::isfinite(ci.lo) ? json(ci.lo) : json(nullptr);
  j["hi"] = std::isfinite(ci.hi) ? json(ci.hi) : json(nullptr);
  return j;
}

void write_seed_log(const std::filesystem::path& path, const stats::ReplicaBatch& batch) {
  std::ofstream out(path);
  out << "replica_id,verdict,boundary_contact,extinction_time\n";
  for (const auto& r : batch.records) {
    out << r.replica_id << ',' << hitting::to_string(r.verdict) << ','
        << (r.boundary_contact ? 1 : 0) << ',';
    if (std::isfinite(r.extinction_time)) out << format_double(r.extinction_time);
    out << '\n';
  }
}

struct KindOutput {
  std::string csv;
  json results;
};

KindOutput rho_output(const stats::ReplicaBatch& batch) {
  const stats::RhoEstimate est = stats::estimate_rho(batch);
  std::ostringstream csv;
  csv << "accepted,rejected,ambiguous,rho_hat,ci_lo,ci_hi,rho_low,rho_high\n";
  csv << est.counts.accepted << ',' << est.counts.rejected << ',' << est.counts.ambiguous << ','
      << format_double(est.rho_hat) << ',' << format_double(est.ci.lo) << ','
      << format_double(est.ci.hi) << ',' << format_double(est.rho_low) << ','
      << format_double(est.rho_high) << '\n';

  json results;
  results["rho_hat"] = est.rho_hat;
  results["ci"] = interval_json(est.ci);
  results["bracket"] = {{"low", est.rho_low}, {"high", est.rho_high}};
  return {csv.str(), results};
}

KindOutput shape_output(const stats::ReplicaBatch& batch, const ExperimentConfig& cfg) {
  engine::Point negative(cfg.direction);
  for (auto& c : negative) c = -c;
  const stats::MuReport forward = stats::estimate_mu(batch, cfg.direction, cfg.n_list);
  const stats::MuReport backward = stats::estimate_mu(batch, negative, cfg.n_list);

  std::ostringstream csv;
  csv << "sign,n,mu_hat,std_error,finite_count,flagged_fraction\n";
  for (const auto* report : {&forward, &backward}) {
    const char sign = report == &forward ? '+' : '-';
    for (const auto& est : report->per_n)
      csv << sign << ',' << est.n << ',' << format_double(est.mu_hat) << ','
          << format_double(est.std_error) << ',' << est.finite_count << ','
          << format_double(est.flagged_fraction) << '\n';
  }

  auto report_json = [](const stats::MuReport& report) {
    json per_n = json::array();
    for (const auto& est : report.per_n)
      per_n.push_back({{"n", est.n},
                       {"mu_hat", est.mu_hat},
                       {"std_error", est.std_error},
                       {"finite_count", est.finite_count},
                       {"flagged_fraction", est.flagged_fraction}});
    return json{{"direction", point_to_string(report.direction)},
                {"per_n", per_n},
                {"drift_rel", report.drift_rel}};
  };
  json results;
  results["forward"] = report_json(forward);
  results["backward"] = report_json(backward);
  return {csv.str(), results};
}

KindOutput theorem1_output(const stats::ReplicaBatch& batch, const ExperimentConfig& cfg) {
  const stats::OrderStats stats = stats::theorem1_order_stats(batch, cfg.direction, cfg.order_n);
  std::ostringstream csv;
  csv << "k,p_hat,ci_lo,ci_hi,mean_t_k,flagged_fraction\n";
  for (int k = 1; k <= stats.n; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    csv << k << ',' << format_double(stats.p_hat[i]) << ',' << format_double(stats.ci[i].lo)
        << ',' << format_double(stats.ci[i].hi) << ',' << format_double(stats.mean_t[i]) << ','
        << format_double(stats.flagged_fraction[i]) << '\n';
  }

  json results;
  results["cesaro"] = stats.cesaro;
  results["increase_density"] = stats.increase_density;
  results["accepted"] = stats.accepted;
  return {csv.str(), results};
}

KindOutput theorem2_output(const stats::ReplicaBatch& batch, const ExperimentConfig& cfg) {
  std::ostringstream csv;
  csv << "p,x,y,distance,ratio,boot_lo,boot_hi,finite_count,flagged_fraction\n";
  json results = json::array();
  for (double p : cfg.p_list) {
    const stats::MomentStats ms = stats::theorem2_moment_stats(batch, cfg.pairs, p);
    for (const auto& pair : ms.pairs)
      csv << format_double(p) << ',' << point_to_string(pair.x) << ',' << point_to_string(pair.y)
          << ',' << format_double(pair.distance) << ',' << format_double(pair.ratio) << ','
          << format_double(pair.bootstrap_ci.lo) << ',' << format_double(pair.bootstrap_ci.hi)
          << ',' << pair.finite_count << ',' << format_double(pair.flagged_fraction) << '\n';

    json aggregates = json::array();
    for (const auto& agg : ms.by_distance)
      aggregates.push_back({{"distance", agg.distance},
                            {"ratio", agg.ratio},
                            {"ci", interval_json(agg.bootstrap_ci)},
                            {"samples", agg.samples}});
    results.push_back({{"p", p}, {"by_distance", aggregates}});
  }
  return {csv.str(), json{{"moments", results}}};
}

KindOutput sigma_tail_output(const stats::ReplicaBatch& batch, const ExperimentConfig& cfg) {
  const stats::TailCurve curve = stats::sigma_gap_tail(batch, cfg.tail_sites, cfg.l_grid);
  std::ostringstream csv;
  csv << "scope,site,L,q_hat,ci_lo,ci_hi,exceedances,samples\n";
  for (std::size_t li = 0; li < curve.l_grid.size(); ++li)
    csv << "pooled,," << format_double(curve.l_grid[li]) << ','
        << format_double(curve.pooled_q[li]) << ',' << format_double(curve.pooled_ci[li].lo)
        << ',' << format_double(curve.pooled_ci[li].hi) << ',' << curve.pooled_exceed[li] << ','
        << curve.samples << '\n';
  for (std::size_t si = 0; si < curve.sites.size(); ++si)
    for (std::size_t li = 0; li < curve.l_grid.size(); ++li)
      csv << "site," << point_to_string(curve.sites[si]) << ','
          << format_double(curve.l_grid[li]) << ',' << format_double(curve.site_q[si][li]) << ','
          << format_double(curve.site_ci[si][li].lo) << ','
          << format_double(curve.site_ci[si][li].hi) << ",,\n";

  json results;
  results["gamma_hat"] = curve.gamma_hat;
  results["gamma_ci"] = interval_json(curve.gamma_bootstrap_ci);
  results["fit_points"] = curve.fit_points;
  results["samples"] = curve.samples;
  results["excluded_censored"] = curve.excluded;
  return {csv.str(), results};
}

void report_violations(const std::vector<Violation>& violations) {
  json j;
  j["error"] = "invalid_config";
  json list = json::array();
  for (const auto& v : violations) list.push_back({{"key", v.key}, {"message", v.message}});
  j["violations"] = list;
  std::cerr << j.dump() << '\n';
}

ExperimentConfig apply_overrides(ExperimentConfig config, const RunOptions& options) {
  if (options.kind_override) config.kind = *options.kind_override;
  if (options.seed_override) config.root_seed = *options.seed_override;
  if (options.out_dir) config.output_dir = *options.out_dir;
  return config;
}

}  // namespace

int run_experiment(const ExperimentConfig& raw_config, const RunOptions& options) {
  const ExperimentConfig config = apply_overrides(raw_config, options);
  const auto violations = config.validate();
  if (!violations.empty()) {
    report_violations(violations);
    return kExitInvalidConfig;
  }

  const int threads = resolve_threads(options.threads);
  const auto t_start = std::chrono::steady_clock::now();
  stats::RunOutcome outcome;
  try {
    outcome = stats::run_replicas_outcome(config, threads);
  } catch (const config_error& e) {
    report_violations({{"config", e.what()}});
    return kExitInvalidConfig;
  }
  const double wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  const std::filesystem::path out_dir(config.output_dir);
  std::filesystem::create_directories(out_dir);
  write_seed_log(out_dir / "seeds.csv", outcome.batch);

  const stats::BatchCounts counts = outcome.batch.counts();
  json summary;
  summary["schema_version"] = 1;
  summary["artifact_version"] = kVersion;
  summary["kind"] = to_string(config.kind);
  summary["config"] = config_json(config);
  summary["diagnostics"] = {
      {"attempts", outcome.attempts},
      {"accepted", counts.accepted},
      {"rejected", counts.rejected},
      {"ambiguous", counts.ambiguous},
      {"acceptance_rate",
       outcome.attempts ? static_cast<double>(counts.accepted) / static_cast<double>(outcome.attempts)
                        : 0.0},
      {"rejection_rate",
       outcome.attempts
           ? 1.0 - static_cast<double>(counts.accepted) / static_cast<double>(outcome.attempts)
           : 0.0},
      {"ambiguous_fraction",
       outcome.attempts ? static_cast<double>(counts.ambiguous) / static_cast<double>(outcome.attempts)
                        : 0.0},
      {"boundary_contact_fraction", outcome.batch.boundary_contact_fraction()},
      {"wall_time_seconds", wall_seconds},
      {"threads", threads},
      {"seed_log", "seeds.csv"},
  };

  if (outcome.cap_exceeded) {
    summary["error"] = "acceptance_cap_exceeded";
    std::ofstream(out_dir / "summary.json") << summary.dump(2) << '\n';
    return kExitAcceptanceCap;
  }

  KindOutput output;
  try {
    switch (config.kind) {
      case ExperimentKind::Rho: output = rho_output(outcome.batch); break;
      case ExperimentKind::Shape: output = shape_output(outcome.batch, config); break;
      case ExperimentKind::Theorem1: output = theorem1_output(outcome.batch, config); break;
      case ExperimentKind::Theorem2: output = theorem2_output(outcome.batch, config); break;
      case ExperimentKind::SigmaTail: output = sigma_tail_output(outcome.batch, config); break;
    }
  } catch (const fit_undefined_error& e) {
    summary["error"] = "fit_undefined";
    summary["detail"] = e.what();
    std::ofstream(out_dir / "summary.json") << summary.dump(2) << '\n';
    return kExitFailure;
  }

  std::ofstream(out_dir / "results.csv") << output.csv;
  summary["results"] = output.results;
  std::ofstream(out_dir / "summary.json") << summary.dump(2) << '\n';
  return kExitOk;
}

int run_experiment_file(const std::filesystem::path& config_path, const RunOptions& options) {
  ExperimentConfig config;
  try {
    config = ExperimentConfig::from_file(config_path);
  } catch (const config_error& e) {
    report_violations({{"config", e.what()}});
    return kExitInvalidConfig;
  }
  return run_experiment(config, options);
}

int rerun_replica(const ExperimentConfig& raw_config, std::uint64_t replica_id,
                  const RunOptions& options, std::ostream& out) {
  const ExperimentConfig config = apply_overrides(raw_config, options);
  const auto violations = config.validate();
  if (!violations.empty()) {
    report_violations(violations);
    return kExitInvalidConfig;
  }

  const engine::LatticePtr lattice = engine::build_lattice(config.dimension, config.radius);
  const stats::TrackingPlan plan = stats::derive_plan(config, *lattice);
  const stats::ReplicaRecord record = stats::simulate_replica(lattice, config, plan, replica_id);

  json j;
  j["replica_id"] = record.replica_id;
  j["root_seed"] = config.root_seed;
  j["verdict"] = hitting::to_string(record.verdict);
  j["boundary_contact"] = record.boundary_contact;
  j["extinction_time"] =
      std::isfinite(record.extinction_time) ? json(record.extinction_time) : json(nullptr);

  json hits = json::array();
  for (std::size_t i = 0; i < record.hit_times.size(); ++i)
    hits.push_back({{"site", point_to_string(lattice->point(plan.hit_sites[i]))},
                    {"t", std::isfinite(record.hit_times[i]) ? json(record.hit_times[i]) : json(nullptr)}});
  j["hit_times"] = hits;

  json essentials = json::array();
  for (std::size_t i = 0; i < record.essentials.size(); ++i) {
    const auto& rec = record.essentials[i];
    essentials.push_back(
        {{"site", point_to_string(lattice->point(plan.essential_sites[i]))},
         {"u", rec.u},
         {"v", rec.v},
         {"sigma", rec.sigma_defined ? json(rec.sigma) : json(nullptr)},
         {"renewals", rec.renewal_count},
         {"first_hit", std::isfinite(rec.first_hit) ? json(rec.first_hit) : json(nullptr)},
         {"branch_censored", rec.branch_censored},
         {"boundary_contact", rec.boundary_contact},
         {"never_hit", rec.never_hit},
         {"global_death", rec.global_death}});
  }
  j["essentials"] = essentials;

  out << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace contactkit::cli
