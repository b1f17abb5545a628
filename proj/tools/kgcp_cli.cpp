// kgcp: run, sweep and report sequential-sampling experiments.
//
//   kgcp run    --problem branin --policy KGCP --hyper MLE --replications 10 --out out/
//   kgcp sweep  --problem schwefel --replications 10 --out sweep/
//   kgcp report --in out/ [--format json]
//
// Exit status: 0 success, 2 configuration or i/o error, 3 evaluation
// failure, 4 model failure. Failed replications are written out first.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgcp/kgcp.hpp"

namespace fs = std::filesystem;
using namespace kgcp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitEvaluation = 3;
constexpr int kExitModel = 4;

struct Options {
  std::string problem = "branin";
  std::string policy = "KGCP";
  std::string hyper = "MLE";
  std::size_t budget = 0;
  std::size_t init = 10;
  std::size_t replications = 1;
  std::uint64_t seed = 1;
  std::size_t mcCandidates = 0;
  std::size_t localRefine = 10;
  std::size_t sliceSamples = 100;
  std::string ucbSchedule = "constant";
  double ucbBeta = 1.0;
  double ucbDelta = 0.1;
  double softK = 1000.0;
  std::string format = "csv";
  std::string out = "results";
  std::string externalCmd;
  double timeoutS = 60.0;
  bool persistent = false;
  std::vector<double> lower, upper;
  std::optional<double> optimum;
  std::size_t threads = 0;
  bool quiet = false;
};

void add_common(CLI::App* app, Options& o) {
  app->add_option("--problem", o.problem, "branin, hartmann6, schwefel, eggholder or external")->capture_default_str();
  app->add_option("--budget", o.budget, "total evaluations N (0: problem default)")->capture_default_str();
  app->add_option("--init", o.init, "initial design size")->capture_default_str();
  app->add_option("--replications", o.replications, "independent runs")->capture_default_str();
  app->add_option("--seed", o.seed, "base seed; run r uses seed + r")->capture_default_str();
  app->add_option("--mc-candidates", o.mcCandidates, "random candidates per acquisition (0: 1000 * d)")
      ->capture_default_str();
  app->add_option("--local-refine", o.localRefine, "candidates refined by pattern search")->capture_default_str();
  app->add_option("--slice-samples", o.sliceSamples, "ensemble size for SS")->capture_default_str();
  app->add_option("--ucb-schedule", o.ucbSchedule, "constant or gp-ucb")->capture_default_str();
  app->add_option("--ucb-beta", o.ucbBeta, "UCB weight for the constant schedule")->capture_default_str();
  app->add_option("--ucb-delta", o.ucbDelta, "confidence parameter for the gp-ucb schedule")->capture_default_str();
  app->add_option("--soft-k", o.softK, "sharpness of soft KGCP")->capture_default_str();
  app->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  app->add_option("--out", o.out, "output directory")->capture_default_str();
  app->add_option("--external-cmd", o.externalCmd, "shell command evaluating the objective");
  app->add_option("--timeout-s", o.timeoutS, "per-evaluation timeout of the external command")->capture_default_str();
  app->add_flag("--persistent", o.persistent, "keep one external process alive per run");
  app->add_option("--lower", o.lower, "domain lower bounds for --problem external")->delimiter(',');
  app->add_option("--upper", o.upper, "domain upper bounds for --problem external")->delimiter(',');
  app->add_option("--optimum", o.optimum, "known optimum value; enables OC for external problems");
  app->add_option("--threads", o.threads, "worker threads (0: all cores)")->capture_default_str();
  app->add_flag("-q,--quiet", o.quiet, "no progress output");
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

RunConfig make_config(const Options& o) {
  RunConfig cfg;
  cfg.problem = o.problem;
  cfg.policy = policy_from_string(o.policy);
  cfg.hyper = hyper_from_string(o.hyper);
  cfg.budgetN = o.budget;
  cfg.initSize = o.init;
  cfg.replications = o.replications;
  cfg.seed = o.seed;
  cfg.acquisition.mcCandidates = o.mcCandidates;
  cfg.acquisition.localRefineCount = o.localRefine;
  cfg.sliceSamples = o.sliceSamples;
  cfg.ucbSchedule = ucb_schedule_from_string(o.ucbSchedule);
  cfg.ucbBeta = o.ucbBeta;
  cfg.ucbDelta = o.ucbDelta;
  cfg.softK = o.softK;
  cfg.threads = o.threads;
  if (!o.externalCmd.empty()) {
    if (!(o.timeoutS > 0.0)) throw ConfigError("--timeout-s must be positive");
    cfg.external = ExternalCommand{o.externalCmd, o.timeoutS, o.persistent};
    // one process per replication keeps persistent objectives isolated
    if (o.persistent) cfg.threads = 1;
  }
  if (!o.lower.empty() || !o.upper.empty()) {
    if (o.problem != "external") throw ConfigError("--lower/--upper only apply to --problem external");
    try {
      cfg.customDomain = Box(to_vector(o.lower), to_vector(o.upper));
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("domain: ") + e.what());
    }
  }
  cfg.customOptimum = o.optimum;
  validate(cfg, problem_metadata(cfg));
  return cfg;
}

OutputFormat format_of(const std::string& s) { return s == "json" ? OutputFormat::Json : OutputFormat::Csv; }

int status_of(const ExperimentResult& res) {
  if (res.failures(FailureKind::Evaluation)) return kExitEvaluation;
  if (res.failures(FailureKind::Model)) return kExitModel;
  return 0;
}

void print_summary(const std::string& label, const ExperimentResult& res) {
  if (res.aggregate.rows.empty()) {
    std::printf("%-10s no successful runs (%zu failed)\n", label.c_str(), res.traces.size());
    return;
  }
  const AggregateRow& f = res.aggregate.final_row();
  std::printf("%-10s N=%-4zu mean OC %.6g  95%% CI [%.6g, %.6g]  runs %zu  failed %zu\n", label.c_str(), f.iteration,
              f.meanOc, f.ciLow, f.ciHigh, f.nRuns, f.nFailed);
}

ExperimentResult execute(const RunConfig& cfg, const Options& o, const std::string& label) {
  auto progress = [&](const RunTrace& t) {
    if (o.quiet) return;
    std::fprintf(stderr, "[%s] run %zu (seed %llu) %s%s%s\n", label.c_str(), t.runId,
                 static_cast<unsigned long long>(t.seed), t.failed() ? "failed" : "done",
                 t.failed() ? ": " : "", t.message.c_str());
  };
  return run_experiment(cfg, progress);
}

int cmd_run(const Options& o) {
  const RunConfig cfg = make_config(o);
  const ExperimentResult res = execute(cfg, o, to_string(cfg.policy) + "-" + to_string(cfg.hyper));
  emit_results(cfg, res, format_of(o.format), o.out);
  print_summary(to_string(cfg.policy) + "-" + to_string(cfg.hyper), res);
  return status_of(res);
}

int cmd_sweep(const Options& o) {
  std::vector<RunConfig> configs;
  for (const char* hyper : {"MLE", "SS"})
    for (const char* policy : {"KGCP", "EI", "UCB"}) {
      Options each = o;
      each.policy = policy;
      each.hyper = hyper;
      configs.push_back(make_config(each));
    }
  int status = 0;
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw IoError("cannot create directory '" + o.out + "': " + ec.message());
  std::ofstream summary(fs::path(o.out) / "summary.csv");
  if (!summary) throw IoError("cannot write " + (fs::path(o.out) / "summary.csv").string());
  summary << "setup,iteration,mean_oc,ci_low,ci_high,n_runs,n_failed\n";
  for (const RunConfig& cfg : configs) {
    const std::string label = to_string(cfg.policy) + "-" + to_string(cfg.hyper);
    const ExperimentResult res = execute(cfg, o, label);
    emit_results(cfg, res, format_of(o.format), fs::path(o.out) / label);
    print_summary(label, res);
    if (!status) status = status_of(res);
    if (res.aggregate.rows.empty()) continue;
    const AggregateRow& f = res.aggregate.final_row();
    summary << label << ',' << f.iteration << ',' << detail::fmt(f.meanOc) << ',' << detail::fmt(f.ciLow) << ','
            << detail::fmt(f.ciHigh) << ',' << f.nRuns << ',' << f.nFailed << '\n';
  }
  return status;
}

int cmd_report(const std::string& in, const std::string& format) {
  const fs::path dir(in);
  Aggregate agg;
  if (fs::exists(dir / "traces.csv")) {
    std::ifstream traces(dir / "traces.csv");
    std::ifstream runs(dir / "runs.csv");
    agg = aggregate(read_traces_csv(traces, runs ? &runs : nullptr));
  } else if (fs::exists(dir / "results.json")) {
    std::ifstream is(dir / "results.json");
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("results.json: ") + e.what());
    }
    ExperimentResult res;
    for (const auto& t : j.at("traces")) {
      RunTrace trace;
      trace.runId = t.at("run_id").get<std::size_t>();
      trace.failure = detail::failure_from_name(t.at("status").get<std::string>());
      for (const auto& r : t.at("records")) {
        RunRecord rec;
        rec.iteration = r.at("iteration").get<std::size_t>();
        rec.oc = r.at("oc").is_null() ? std::numeric_limits<double>::quiet_NaN() : r.at("oc").get<double>();
        trace.records.push_back(rec);
      }
      res.traces.push_back(std::move(trace));
    }
    agg = aggregate(res.traces);
  } else {
    throw IoError("no traces.csv or results.json in '" + in + "'");
  }
  if (format == "json") {
    nlohmann::json rows = nlohmann::json::array();
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    for (const auto& r : agg.rows)
      rows.push_back({{"iteration", r.iteration}, {"mean_oc", num(r.meanOc)}, {"ci_low", num(r.ciLow)},
                      {"ci_high", num(r.ciHigh)}, {"n_runs", r.nRuns}, {"n_failed", r.nFailed}});
    std::cout << rows.dump(2) << '\n';
  } else {
    write_aggregate_csv(std::cout, agg);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kriging-based sequential sampling with the KGCP, EI and UCB policies"};
  app.require_subcommand(1);
  Options runOpts, sweepOpts;
  std::string reportIn, reportFormat = "csv";

  CLI::App* run = app.add_subcommand("run", "one policy/hyperparameter configuration");
  add_common(run, runOpts);
  run->add_option("--policy", runOpts.policy, "KGCP, EI, UCB, SoftKGCP, ED or Mean")->capture_default_str();
  run->add_option("--hyper", runOpts.hyper, "MLE or SS")->capture_default_str();

  CLI::App* sweep = app.add_subcommand("sweep", "KGCP, EI and UCB with MLE and SS, one subdirectory each");
  add_common(sweep, sweepOpts);

  CLI::App* report = app.add_subcommand("report", "re-aggregate the traces of an earlier run");
  report->add_option("--in", reportIn, "directory written by run")->required();
  report->add_option("--format", reportFormat, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(runOpts);
    if (*sweep) return cmd_sweep(sweepOpts);
    return cmd_report(reportIn, reportFormat);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitConfig;
  } catch (const EvaluationFailed& e) {
    std::fprintf(stderr, "evaluation failed: %s\n", e.what());
    return kExitEvaluation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitModel;
  }
}
