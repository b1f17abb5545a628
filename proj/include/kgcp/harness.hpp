#pragma once

// Sequential optimization runs (initial design, fit, propose, evaluate, refit)
// and their aggregation across replications.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kgcp/acquisition.hpp"
#include "kgcp/benchmarks.hpp"
#include "kgcp/design.hpp"
#include "kgcp/errors.hpp"
#include "kgcp/external.hpp"
#include "kgcp/hyperfit.hpp"
#include "kgcp/kriging.hpp"
#include "kgcp/policies.hpp"

namespace kgcp {

enum class HyperMethod { Mle, SliceSampling };

inline std::string to_string(HyperMethod h) { return h == HyperMethod::Mle ? "MLE" : "SS"; }

inline HyperMethod hyper_from_string(const std::string& s) {
  if (s == "MLE") return HyperMethod::Mle;
  if (s == "SS") return HyperMethod::SliceSampling;
  throw ConfigError("unknown hyperparameter method '" + s + "' (expected MLE or SS)");
}

enum class OutputFormat { Csv, Json };

/// How UCB's exploration weight is chosen: a fixed beta, or the GP-UCB
/// schedule sqrt(2 log(n^(d/2+2) pi^2 / (3 delta))) that grows with n.
enum class UcbSchedule { Constant, GpUcb };

inline std::string to_string(UcbSchedule s) { return s == UcbSchedule::Constant ? "constant" : "gp-ucb"; }

inline UcbSchedule ucb_schedule_from_string(const std::string& s) {
  if (s == "constant") return UcbSchedule::Constant;
  if (s == "gp-ucb") return UcbSchedule::GpUcb;
  throw ConfigError("unknown UCB schedule '" + s + "' (expected constant or gp-ucb)");
}

struct RunConfig {
  std::string problem = "branin";  // built-in name, or "external" with a custom domain
  std::optional<ExternalCommand> external;
  std::optional<Box> customDomain;      // required when problem == "external"
  std::optional<double> customOptimum;  // OC is NaN without it
  PolicyKind policy = PolicyKind::Kgcp;
  HyperMethod hyper = HyperMethod::Mle;
  std::size_t sliceSamples = 100;
  std::size_t initSize = 10;
  std::size_t budgetN = 0;  // 0 => problem default
  std::size_t replications = 1;
  std::uint64_t seed = 1;
  AcquisitionConfig acquisition;
  MleOptions mle;
  SliceOptions slice;
  UcbSchedule ucbSchedule = UcbSchedule::Constant;
  double ucbBeta = 1.0;   // used by the constant schedule
  double ucbDelta = 0.1;  // used by the GP-UCB schedule
  double softK = 1000.0;
  std::size_t threads = 0;  // 0 => hardware concurrency
};

/// Domain, optimum and budget of the configured problem; evaluate is left as
/// the built-in function (empty for "external").
inline Problem problem_metadata(const RunConfig& cfg) {
  Problem p;
  if (cfg.problem == "external") {
    if (!cfg.external) throw ConfigError("problem 'external' requires an external command");
    if (!cfg.customDomain) throw ConfigError("problem 'external' requires a domain");
    p.name = "external";
    p.domain = *cfg.customDomain;
    p.d = p.domain.dim();
    p.trueOptimum = cfg.customOptimum.value_or(std::numeric_limits<double>::quiet_NaN());
    p.trueOptimizer = p.domain.center();
    p.budgetN = 0;
  } else {
    p = problem_by_name(cfg.problem);
    if (cfg.customOptimum) p.trueOptimum = *cfg.customOptimum;
  }
  return p;
}

/// Problem with the evaluation routed to the external command if one is
/// configured. The returned evaluate is not thread-safe for persistent
/// external objectives.
inline Problem resolve_problem(const RunConfig& cfg) {
  Problem p = problem_metadata(cfg);
  if (cfg.external) {
    auto obj = std::make_shared<ExternalObjective>(*cfg.external);
    p.evaluate = [obj](const Vector& x) { return (*obj)(x); };
  }
  return p;
}

inline std::size_t resolved_budget(const RunConfig& cfg, const Problem& p) {
  return cfg.budgetN ? cfg.budgetN : p.budgetN;
}

inline void validate(const RunConfig& cfg, const Problem& p) {
  const std::size_t n = resolved_budget(cfg, p);
  if (n == 0) throw ConfigError("budget must be given for this problem");
  if (cfg.initSize < 1) throw ConfigError("initial design size must be >= 1");
  if (n <= cfg.initSize) throw ConfigError("budget must exceed the initial design size");
  if (cfg.replications < 1) throw ConfigError("replications must be >= 1");
  if (cfg.hyper == HyperMethod::SliceSampling && cfg.sliceSamples < 1) throw ConfigError("slice samples must be >= 1");
  if (!(cfg.ucbDelta > 0.0 && cfg.ucbDelta < 1.0)) throw ConfigError("ucb delta must lie in (0,1)");
  if (!(cfg.ucbBeta >= 0.0) || !std::isfinite(cfg.ucbBeta)) throw ConfigError("ucb beta must be finite and >= 0");
  if (!(cfg.softK > 0.0) || !std::isfinite(cfg.softK)) throw ConfigError("soft KGCP k must be finite and > 0");
  cfg.acquisition.validate(p.d);
}

struct RunRecord {
  std::size_t runId = 0;
  std::size_t iteration = 0;  // observations available after this step
  Vector x;
  double y = 0.0;
  double oc = 0.0;
  double wallclockMillis = 0.0;
  Vector thetaSummary;  // log10 theta (MLE) or its ensemble mean (SS)
};

enum class FailureKind { None, Evaluation, Model };

struct RunTrace {
  std::size_t runId = 0;
  std::uint64_t seed = 0;
  FailureKind failure = FailureKind::None;
  std::string message;
  std::vector<RunRecord> records;

  bool failed() const { return failure != FailureKind::None; }
};

namespace detail {

inline double checked_evaluate(const Problem& p, const Vector& x) {
  const double v = p.evaluate(x);
  if (!std::isfinite(v)) throw EvaluationFailed("objective returned a nonfinite value");
  return v;
}

inline ModelEnsemble fit_hyperparameters(const Dataset& data, const RunConfig& cfg, Rng& rng) {
  const BasisSet basis = BasisSet::constant();
  KrigingModel mle = mle_fit(data, basis, rng, cfg.mle);
  if (cfg.hyper == HyperMethod::Mle) return ModelEnsemble::single(std::move(mle));
  return slice_sample(data, basis, mle.theta(), cfg.sliceSamples, rng, cfg.slice);
}

inline Vector theta_summary(const ModelEnsemble& e) {
  Vector acc = Vector::Zero(static_cast<Eigen::Index>(e.data().dim()));
  for (const auto& m : e.models) acc += m.theta().log10();
  return acc / static_cast<double>(e.size());
}

inline double ucb_beta(const RunConfig& cfg, std::size_t n, std::size_t d) {
  return cfg.ucbSchedule == UcbSchedule::Constant ? cfg.ucbBeta : gp_ucb_beta(n, d, cfg.ucbDelta);
}

inline double opportunity_cost_or_nan(const Problem& p, const Vector& xHat) {
  if (!std::isfinite(p.trueOptimum)) return std::numeric_limits<double>::quiet_NaN();
  return opportunity_cost(p, xHat);
}

}  // namespace detail

/// Runs one replication. Record iteration == initSize describes the initial
/// design (its best observation); the remaining records are the acquisitions
/// initSize+1 .. budgetN. Failures return the partial trace flagged.
inline RunTrace run_single(const RunConfig& cfg, std::uint64_t replicationSeed, std::size_t runId = 0) {
  using Clock = std::chrono::steady_clock;
  const Problem problem = resolve_problem(cfg);
  validate(cfg, problem);
  const std::size_t budget = resolved_budget(cfg, problem);
  const std::size_t d = problem.d;

  RunTrace trace;
  trace.runId = runId;
  trace.seed = replicationSeed;
  Rng rng(replicationSeed);

  auto elapsedMs = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };

  try {
    auto t0 = Clock::now();
    const Matrix X0 = maximin_lhs(DesignSpec{cfg.initSize, d, rng()}, problem.domain);
    Vector y0(X0.rows());
    for (Eigen::Index i = 0; i < X0.rows(); ++i) y0[i] = detail::checked_evaluate(problem, X0.row(i).transpose());
    Dataset data(X0, y0, problem.domain);
    ModelEnsemble ensemble = detail::fit_hyperparameters(data, cfg, rng);
    {
      Eigen::Index best = 0;
      y0.maxCoeff(&best);
      RunRecord rec;
      rec.runId = runId;
      rec.iteration = data.size();
      rec.x = X0.row(best).transpose();
      rec.y = y0[best];
      rec.oc = detail::opportunity_cost_or_nan(problem, model_argmax(ensemble, problem.domain, cfg.acquisition, rng));
      rec.wallclockMillis = elapsedMs(t0);
      rec.thetaSummary = detail::theta_summary(ensemble);
      trace.records.push_back(std::move(rec));
    }

    while (data.size() < budget) {
      t0 = Clock::now();
      PolicyContext ctx;
      ctx.yMax = data.y().maxCoeff();
      ctx.iteration = data.size();
      ctx.ucbBeta = detail::ucb_beta(cfg, data.size(), d);
      ctx.softK = cfg.softK;
      const Proposal next = propose(ensemble, PolicySpec{cfg.policy}, ctx, problem.domain, cfg.acquisition, rng);
      const double y = detail::checked_evaluate(problem, next.x);
      data = data.with(next.x, y);
      ensemble = detail::fit_hyperparameters(data, cfg, rng);
      const Vector xHat = model_argmax(ensemble, problem.domain, cfg.acquisition, rng);

      RunRecord rec;
      rec.runId = runId;
      rec.iteration = data.size();
      rec.x = next.x;
      rec.y = y;
      rec.oc = detail::opportunity_cost_or_nan(problem, xHat);
      rec.wallclockMillis = elapsedMs(t0);
      rec.thetaSummary = detail::theta_summary(ensemble);
      trace.records.push_back(std::move(rec));
    }
  } catch (const EvaluationFailed& e) {
    trace.failure = FailureKind::Evaluation;
    trace.message = e.what();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    trace.failure = FailureKind::Model;
    trace.message = e.what();
  }
  return trace;
}

struct AggregateRow {
  std::size_t iteration = 0;
  double meanOc = 0.0;
  double ciLow = 0.0;
  double ciHigh = 0.0;
  std::size_t nRuns = 0;
  std::size_t nFailed = 0;
};

struct Aggregate {
  std::vector<AggregateRow> rows;

  const AggregateRow& final_row() const {
    if (rows.empty()) throw InvalidArgument("aggregate has no rows");
    return rows.back();
  }
  const AggregateRow* at(std::size_t iteration) const {
    for (const auto& r : rows)
      if (r.iteration == iteration) return &r;
    return nullptr;
  }
};

/// Normal-approximation interval mean +/- 1.96 * sd / sqrt(R), sd with R - 1
/// in the denominator; zero width for a single value.
inline AggregateRow summarize(std::size_t iteration, const std::vector<double>& values, std::size_t nFailed) {
  AggregateRow row;
  row.iteration = iteration;
  row.nRuns = values.size();
  row.nFailed = nFailed;
  if (values.empty()) {
    row.meanOc = row.ciLow = row.ciHigh = std::numeric_limits<double>::quiet_NaN();
    return row;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double half = 0.0;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    half = 1.96 * sd / std::sqrt(static_cast<double>(values.size()));
  }
  row.meanOc = mean;
  row.ciLow = mean - half;
  row.ciHigh = mean + half;
  return row;
}

/// Per-iteration mean OC over successful runs; failed runs are only counted.
inline Aggregate aggregate(const std::vector<RunTrace>& traces) {
  std::map<std::size_t, std::vector<double>> byIteration;
  std::size_t failed = 0;
  for (const auto& t : traces) {
    if (t.failed()) {
      ++failed;
      continue;
    }
    for (const auto& r : t.records)
      if (std::isfinite(r.oc)) byIteration[r.iteration].push_back(r.oc);
  }
  Aggregate agg;
  for (const auto& [it, values] : byIteration) agg.rows.push_back(summarize(it, values, failed));
  return agg;
}

struct ExperimentResult {
  Aggregate aggregate;
  std::vector<RunTrace> traces;

  std::size_t failures(FailureKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(traces.begin(), traces.end(), [kind](const RunTrace& t) { return t.failure == kind; }));
  }
};

/// Replication r runs with seed cfg.seed + r. Replications are distributed
/// over worker threads; results are ordered by replication index.
inline ExperimentResult run_experiment(const RunConfig& cfg,
                                       const std::function<void(const RunTrace&)>& onRunDone = {}) {
  validate(cfg, problem_metadata(cfg));
  ExperimentResult result;
  result.traces.resize(cfg.replications);
  std::size_t workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, cfg.replications);

  std::atomic<std::size_t> next{0};
  std::mutex doneMutex;
  std::exception_ptr error;
  auto work = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= cfg.replications) return;
      try {
        result.traces[r] = run_single(cfg, cfg.seed + r, r);
        if (onRunDone) {
          std::lock_guard lock(doneMutex);
          onRunDone(result.traces[r]);
        }
      } catch (...) {
        std::lock_guard lock(doneMutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  result.aggregate = aggregate(result.traces);
  return result;
}

}  // namespace kgcp
