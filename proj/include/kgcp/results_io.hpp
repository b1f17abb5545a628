#pragma once

// Result files. CSV output in a directory:
//   traces.csv     run_id,iteration,x_1..x_d,y,oc,wallclock_ms
//   aggregate.csv  iteration,mean_oc,ci_low,ci_high,n_runs,n_failed
//   runs.csv       run_id,seed,status,message
// JSON output writes results.json with the same fields plus the resolved
// configuration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgcp/errors.hpp"
#include "kgcp/harness.hpp"

namespace kgcp {

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw IoError("cannot parse number '" + s + "'");
  }
  if (pos != s.size()) throw IoError("cannot parse number '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
  return is;
}

inline std::string failure_name(FailureKind k) {
  switch (k) {
    case FailureKind::None: return "ok";
    case FailureKind::Evaluation: return "evaluation_failed";
    case FailureKind::Model: return "model_failed";
  }
  return "ok";
}

inline FailureKind failure_from_name(const std::string& s) {
  if (s == "ok") return FailureKind::None;
  if (s == "evaluation_failed") return FailureKind::Evaluation;
  if (s == "model_failed") return FailureKind::Model;
  throw IoError("unknown run status '" + s + "'");
}

}  // namespace detail

inline std::string trace_header(std::size_t d) {
  std::string h = "run_id,iteration";
  for (std::size_t i = 1; i <= d; ++i) h += ",x_" + std::to_string(i);
  return h + ",y,oc,wallclock_ms";
}

inline const char* aggregate_header() { return "iteration,mean_oc,ci_low,ci_high,n_runs,n_failed"; }

inline void write_traces_csv(std::ostream& os, const std::vector<RunTrace>& traces, std::size_t d) {
  os << trace_header(d) << '\n';
  for (const auto& t : traces)
    for (const auto& r : t.records) {
      os << r.runId << ',' << r.iteration;
      for (Eigen::Index i = 0; i < r.x.size(); ++i) os << ',' << detail::fmt(r.x[i]);
      os << ',' << detail::fmt(r.y) << ',' << detail::fmt(r.oc) << ',' << detail::fmt(r.wallclockMillis) << '\n';
    }
}

inline void write_aggregate_csv(std::ostream& os, const Aggregate& agg) {
  os << aggregate_header() << '\n';
  for (const auto& r : agg.rows)
    os << r.iteration << ',' << detail::fmt(r.meanOc) << ',' << detail::fmt(r.ciLow) << ',' << detail::fmt(r.ciHigh)
       << ',' << r.nRuns << ',' << r.nFailed << '\n';
}

inline void write_runs_csv(std::ostream& os, const std::vector<RunTrace>& traces) {
  os << "run_id,seed,status,message\n";
  for (const auto& t : traces)
    os << t.runId << ',' << t.seed << ',' << detail::failure_name(t.failure) << ',' << detail::quote_csv(t.message)
       << '\n';
}

/// Parses traces.csv; run status comes from runs.csv content when given.
inline std::vector<RunTrace> read_traces_csv(std::istream& traces, std::istream* runs = nullptr) {
  std::string line;
  if (!std::getline(traces, line)) throw IoError("traces: empty file");
  const auto header = detail::split_csv(line);
  if (header.size() < 6 || header[0] != "run_id" || header[1] != "iteration") throw IoError("traces: bad header");
  const std::size_t d = header.size() - 5;
  if (line != trace_header(d)) throw IoError("traces: bad header '" + line + "'");

  std::map<std::size_t, RunTrace> byRun;
  while (std::getline(traces, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != header.size()) throw IoError("traces: wrong field count in '" + line + "'");
    RunRecord r;
    r.runId = static_cast<std::size_t>(std::stoull(f[0]));
    r.iteration = static_cast<std::size_t>(std::stoull(f[1]));
    r.x.resize(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) r.x[static_cast<Eigen::Index>(i)] = detail::parse_double(f[2 + i]);
    r.y = detail::parse_double(f[2 + d]);
    r.oc = detail::parse_double(f[3 + d]);
    r.wallclockMillis = detail::parse_double(f[4 + d]);
    auto& t = byRun[r.runId];
    t.runId = r.runId;
    t.records.push_back(std::move(r));
  }
  if (runs) {
    if (!std::getline(*runs, line) || line != "run_id,seed,status,message") throw IoError("runs: bad header");
    while (std::getline(*runs, line)) {
      if (line.empty()) continue;
      const auto f = detail::split_csv(line);
      if (f.size() != 4) throw IoError("runs: wrong field count in '" + line + "'");
      auto& t = byRun[static_cast<std::size_t>(std::stoull(f[0]))];
      t.runId = static_cast<std::size_t>(std::stoull(f[0]));
      t.seed = std::stoull(f[1]);
      t.failure = detail::failure_from_name(f[2]);
      t.message = f[3];
    }
  }
  std::vector<RunTrace> out;
  for (auto& [id, t] : byRun) out.push_back(std::move(t));
  return out;
}

inline Aggregate read_aggregate_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != aggregate_header()) throw IoError("aggregate: bad header");
  Aggregate agg;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 6) throw IoError("aggregate: wrong field count in '" + line + "'");
    AggregateRow r;
    r.iteration = static_cast<std::size_t>(std::stoull(f[0]));
    r.meanOc = detail::parse_double(f[1]);
    r.ciLow = detail::parse_double(f[2]);
    r.ciHigh = detail::parse_double(f[3]);
    r.nRuns = static_cast<std::size_t>(std::stoull(f[4]));
    r.nFailed = static_cast<std::size_t>(std::stoull(f[5]));
    agg.rows.push_back(r);
  }
  return agg;
}

/// Configuration with every default resolved against the problem.
inline nlohmann::json config_to_json(const RunConfig& cfg) {
  const Problem p = problem_metadata(cfg);
  nlohmann::json j;
  j["problem"] = cfg.problem;
  j["dimension"] = p.d;
  j["domain"] = {{"lower", std::vector<double>(p.domain.lower().begin(), p.domain.lower().end())},
                 {"upper", std::vector<double>(p.domain.upper().begin(), p.domain.upper().end())}};
  j["true_optimum"] = std::isfinite(p.trueOptimum) ? nlohmann::json(p.trueOptimum) : nlohmann::json(nullptr);
  j["policy"] = to_string(cfg.policy);
  j["hyper"] = to_string(cfg.hyper);
  j["slice_samples"] = cfg.hyper == HyperMethod::SliceSampling ? nlohmann::json(cfg.sliceSamples) : nlohmann::json(nullptr);
  j["init_size"] = cfg.initSize;
  j["budget"] = resolved_budget(cfg, p);
  j["replications"] = cfg.replications;
  j["seed"] = cfg.seed;
  j["ucb_schedule"] = to_string(cfg.ucbSchedule);
  j["ucb_beta"] = cfg.ucbBeta;
  j["ucb_delta"] = cfg.ucbDelta;
  j["soft_k"] = cfg.softK;
  j["initial_design"] = {{"method", "best-of-K random maximin Latin hypercube"}, {"candidates", DesignSpec{}.candidates}};
  j["acquisition"] = {{"mc_candidates", cfg.acquisition.candidates_for(p.d)},
                      {"local_refine", cfg.acquisition.localRefineCount},
                      {"local_budget", cfg.acquisition.localBudget},
                      {"initial_step_fraction", cfg.acquisition.initialStepFraction},
                      {"min_step_fraction", cfg.acquisition.minStepFraction},
                      {"duplicate_tolerance", cfg.acquisition.duplicateTolerance}};
  const Box mleBounds = cfg.mle.log10Bounds.dim() ? cfg.mle.log10Bounds : default_log10_bounds(p.d);
  j["mle"] = {{"starts", cfg.mle.starts},
              {"evaluations_per_start", cfg.mle.evaluationsPerStart},
              {"log10_theta_lower", std::vector<double>(mleBounds.lower().begin(), mleBounds.lower().end())},
              {"log10_theta_upper", std::vector<double>(mleBounds.upper().begin(), mleBounds.upper().end())}};
  j["slice"] = {{"width_decades", cfg.slice.width}, {"max_doublings", cfg.slice.maxDoublings}};
  j["jitter"] = {{"initial", cfg.mle.jitter.initial}, {"growth", cfg.mle.jitter.growth}, {"max", cfg.mle.jitter.max}};
  if (cfg.external) {
    j["external"] = {{"command", cfg.external->command},
                     {"timeout_s", cfg.external->timeoutSeconds},
                     {"persistent", cfg.external->persistent}};
  }
  return j;
}

inline nlohmann::json results_to_json(const RunConfig& cfg, const ExperimentResult& res) {
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json agg = nlohmann::json::array();
  for (const auto& r : res.aggregate.rows)
    agg.push_back({{"iteration", r.iteration},
                   {"mean_oc", num(r.meanOc)},
                   {"ci_low", num(r.ciLow)},
                   {"ci_high", num(r.ciHigh)},
                   {"n_runs", r.nRuns},
                   {"n_failed", r.nFailed}});
  j["aggregate"] = agg;
  nlohmann::json traces = nlohmann::json::array();
  for (const auto& t : res.traces) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : t.records)
      records.push_back({{"run_id", r.runId},
                         {"iteration", r.iteration},
                         {"x", std::vector<double>(r.x.begin(), r.x.end())},
                         {"y", r.y},
                         {"oc", num(r.oc)},
                         {"wallclock_ms", r.wallclockMillis},
                         {"log10_theta", std::vector<double>(r.thetaSummary.begin(), r.thetaSummary.end())}});
    traces.push_back({{"run_id", t.runId},
                      {"seed", t.seed},
                      {"status", detail::failure_name(t.failure)},
                      {"message", t.message},
                      {"records", records}});
  }
  j["traces"] = traces;
  return j;
}

inline Aggregate aggregate_from_json(const nlohmann::json& j) {
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  Aggregate agg;
  for (const auto& r : j.at("aggregate"))
    agg.rows.push_back({r.at("iteration").get<std::size_t>(), num(r.at("mean_oc")), num(r.at("ci_low")),
                        num(r.at("ci_high")), r.at("n_runs").get<std::size_t>(), r.at("n_failed").get<std::size_t>()});
  return agg;
}

/// Writes results into directory `dir` (created if needed).
inline void emit_results(const RunConfig& cfg, const ExperimentResult& res, OutputFormat format,
                         const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  if (format == OutputFormat::Json) {
    auto os = detail::open_out(dir / "results.json");
    os << results_to_json(cfg, res).dump(2) << '\n';
    if (!os) throw IoError("write failed for results.json");
    return;
  }
  const std::size_t d = problem_metadata(cfg).d;
  {
    auto os = detail::open_out(dir / "traces.csv");
    write_traces_csv(os, res.traces, d);
    if (!os) throw IoError("write failed for traces.csv");
  }
  {
    auto os = detail::open_out(dir / "aggregate.csv");
    write_aggregate_csv(os, res.aggregate);
    if (!os) throw IoError("write failed for aggregate.csv");
  }
  {
    auto os = detail::open_out(dir / "runs.csv");
    write_runs_csv(os, res.traces);
    if (!os) throw IoError("write failed for runs.csv");
  }
  {
    auto os = detail::open_out(dir / "config.json");
    os << config_to_json(cfg).dump(2) << '\n';
  }
}

}  // namespace kgcp
