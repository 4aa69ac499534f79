// ewoc: run simulation studies, print optimal-dose censuses, advance a trial
// snapshot, and serve the trial API.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "ewoc/ewoc.hpp"
#include "ewoc/http_api.hpp"
#include "ewoc/report.hpp"
#include "ewoc/store.hpp"

namespace fs = std::filesystem;
using ewoc::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Error reported as one JSON object on stderr; `code` is the process exit status.
struct CliError {
  int code;
  json body;
};

[[noreturn]] void fail(int code, const std::string& kind, const std::string& message, json extra = json::object()) {
  extra["error"] = kind;
  extra["message"] = message;
  throw CliError{code, extra};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(kExitUsage, "usage", "cannot open " + path, {{"path", path}});
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    fail(kExitUsage, "parse", e.what(), {{"path", path}, {"line", line}, {"column", column}});
  }
}

/// Apply "a.b.c=value" overrides; the value is JSON when it parses, else a string.
void apply_overrides(json& j, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) fail(kExitUsage, "usage", "override must look like key=value: " + o);
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    json* node = &j;
    std::stringstream parts(key);
    std::string part;
    std::vector<std::string> path;
    while (std::getline(parts, part, '.')) path.push_back(part);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (!node->is_object()) fail(kExitUsage, "usage", "override path is not an object: " + key);
      node = &(*node)[path[i]];
      if (node->is_null()) *node = json::object();
    }
    if (!node->is_object()) fail(kExitUsage, "usage", "override path is not an object: " + key);
    (*node)[path.back()] = value;
  }
}

unsigned default_threads() {
  if (const char* env = std::getenv("EWOC_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(kExitRuntime, "io", "cannot write " + path.string());
  out << text;
}

/// Replace `path` atomically.
void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  write_text(tmp, text);
  fs::rename(tmp, path);
}

struct SimulateOptions {
  std::string config;
  std::string out = "out";
  std::vector<std::string> overrides;
  long long seed = -1;
  int replicates = 0;
  unsigned threads = 0;
  std::string backend;
  std::string estimator;
  bool quiet = false;
};

int run_simulate(const SimulateOptions& o) {
  json j = read_json_file(o.config);
  if (o.seed >= 0) j["seed"] = o.seed;
  if (o.replicates > 0) j["replicates"] = o.replicates;
  if (!o.backend.empty()) j["trial"]["backend"]["kind"] = o.backend;
  if (!o.estimator.empty()) j["trial"]["mtd_estimator"] = o.estimator;
  apply_overrides(j, o.overrides);
  const ewoc::StudyConfig study = ewoc::study_config_from_json(j);

  ewoc::RunOptions run;
  run.threads = o.threads > 0 ? o.threads : default_threads();
  const auto total = ewoc::enumerate_cells(study).size();
  if (!o.quiet)
    run.on_cell = [total](const ewoc::CellResult& c) {
      std::cerr << "cell " << c.cell.index + 1 << "/" << total << " " << c.cell.model.label() << " mtd "
                << c.cell.model.true_mtd << " n " << c.cell.sample_size << " " << c.cell.scheme.label() << "\n";
    };
  const auto result = ewoc::run_study(study, run);

  fs::create_directories(o.out);
  std::ostringstream oc, summary, cells;
  ewoc::write_oc_csv(oc, result);
  ewoc::write_relative_loss_summary_csv(summary, result);
  ewoc::write_relative_loss_cells_csv(cells, result);
  write_text(fs::path(o.out) / "oc.csv", oc.str());
  write_text(fs::path(o.out) / "relative_loss_summary.csv", summary.str());
  write_text(fs::path(o.out) / "relative_loss_cells.csv", cells.str());
  write_text(fs::path(o.out) / "metadata.json", ewoc::study_metadata(study).dump(2) + "\n");

  if (result.total_failures() > 0) {
    json census = json::array();
    for (const auto& c : result.cells)
      if (c.failures > 0) census.push_back({{"cell", c.cell.index}, {"failures", c.failures}, {"first", c.first_failure}});
    fail(kExitRuntime, "replicate_failures", std::to_string(result.total_failures()) + " replicates failed",
         {{"cells", census}});
  }
  return kExitOk;
}

struct CensusOptions {
  std::string kind = "mtd";
  std::vector<double> spacings;
  std::vector<double> mtds;
  double rho0 = 0.05;
  double theta = 0.33;
  double tox_halfwidth = 0.10;
  double mtd_factor = 0.15;
  std::string link = "logistic";
  double shape = 0.0;
  std::string csv;
};

int run_census(const CensusOptions& o) {
  ewoc::CensusKind kind;
  if (o.kind == "mtd") kind = ewoc::CensusKind::MtdInterval;
  else if (o.kind == "tox") kind = ewoc::CensusKind::ToxInterval;
  else fail(kExitUsage, "usage", "--kind must be mtd or tox");
  const auto spacings = o.spacings.empty() ? std::vector<double>{0.05, 0.10, 0.20, 0.25} : o.spacings;
  const auto mtds = o.mtds.empty() ? std::vector<double>{0.2, 0.4, 0.6, 0.8} : o.mtds;
  ewoc::LinkFunction link;
  if (o.link == "logistic") link = ewoc::LinkFunction::logistic();
  else if (o.link == "normal") link = ewoc::LinkFunction::normal();
  else if (o.link == "skewnormal") link = ewoc::LinkFunction::skew_normal(0.0, 1.0, o.shape);
  else fail(kExitUsage, "usage", "--link must be logistic, normal or skewnormal");
  if (!(o.rho0 > 0.0 && o.rho0 < o.theta)) fail(kExitUsage, "usage", "--rho0 must lie in (0, theta)");
  for (double m : mtds)
    if (!(m > 0.0 && m <= 1.0)) fail(kExitUsage, "usage", "--mtd must lie in (0, 1]");
  ewoc::OcParams params;
  params.mtd_halfwidth_factor = o.mtd_factor;
  params.tox_halfwidth = o.tox_halfwidth;
  ewoc::CensusTable table;
  try {
    table = ewoc::census_table(kind, mtds, spacings, link, o.rho0, o.theta, params);
  } catch (const ewoc::DomainError& e) {
    fail(kExitUsage, "usage", e.what());
  }
  ewoc::print_census(std::cout, table, params);
  if (!o.csv.empty()) {
    std::ostringstream os;
    ewoc::write_census_csv(os, table);
    write_text(o.csv, os.str());
  }
  return kExitOk;
}

ewoc::TrialState load_snapshot(const std::string& path) {
  const json j = read_json_file(path);
  try {
    return ewoc::trial_from_json(j);
  } catch (const ewoc::IntegrityError& e) {
    fail(kExitRuntime, "integrity", e.what(), {{"path", path}});
  }
}

struct NextDoseOptions {
  std::string snapshot;
  bool commit = false;
  int dlt = -1;
  bool json_out = false;
};

int run_next_dose(const NextDoseOptions& o) {
  const ewoc::TrialState state = load_snapshot(o.snapshot);
  if (state.status() == ewoc::TrialStatus::Complete)
    fail(kExitRuntime, "trial_complete", "trial is complete; use `estimate` for the MTD");
  if (state.status() == ewoc::TrialStatus::AwaitingOutcome) {
    const double dose = ewoc::current_cohort_dose(state);
    if (!o.commit) {
      std::cout << json{{"status", to_string(state.status())}, {"pending_dose", dose}}.dump(2) << "\n";
      return kExitOk;
    }
  }
  const auto rec = state.status() == ewoc::TrialStatus::ReadyToDose ? std::optional(ewoc::recommend_next(state))
                                                                     : std::nullopt;
  if (rec) {
    json out = ewoc::to_json(*rec);
    out["posterior"] = ewoc::to_json(rec->posterior);
    out["status"] = to_string(state.status());
    out["patients"] = state.size();
    if (o.json_out) {
      std::cout << out.dump(2) << "\n";
    } else {
      std::printf("patients recorded   %zu of %d\n", state.size(), state.config().sample_size);
      std::printf("alpha               %.6g\n", rec->alpha_used);
      std::printf("continuous dose     %.6f\n", rec->continuous_dose);
      std::printf("administered dose   %.6f\n", rec->administered_dose);
      std::printf("gamma median        %.6f\n", rec->posterior.gamma_median);
      for (double p : ewoc::kReportedProbs) std::printf("gamma q%-4g         %.6f\n", p, rec->posterior.quantile(p));
    }
  }
  if (o.commit) {
    if (o.dlt != 0 && o.dlt != 1) fail(kExitUsage, "usage", "--commit needs --dlt 0 or 1");
    const double dose = ewoc::current_cohort_dose(state);
    const auto next = ewoc::record_outcome(state, dose, o.dlt);
    write_atomically(o.snapshot, ewoc::to_json(next).dump(2) + "\n");
    std::cerr << "recorded dlt=" << o.dlt << " at dose " << dose << "; " << next.size() << " patients\n";
  }
  return kExitOk;
}

int run_estimate(const std::string& path) {
  const ewoc::TrialState state = load_snapshot(path);
  const auto est = ewoc::estimate_mtd(state);
  json out = ewoc::to_json(est);
  out["estimator"] = to_string(state.config().mtd_estimator);
  out["patients"] = state.size();
  out["posterior"] = ewoc::to_json(est.posterior);
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

struct ServeOptions {
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir = "data";
  std::string ui_dir = "ui";
};

httplib::Server* g_server = nullptr;

int run_serve(const ServeOptions& o) {
  ewoc::TrialStore store(o.data_dir);
  httplib::Server server;
  ewoc::register_routes(server, store, o.ui_dir);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "listening on http://" << o.host << ":" << o.port << " (data " << o.data_dir << ")\n";
  if (!server.listen(o.host, o.port)) fail(kExitRuntime, "io", "cannot listen on port " + std::to_string(o.port));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EWOC dose finding: simulation studies, censuses, trial conduct"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation study and write CSV/JSON outputs");
  simulate->add_option("--config", sim.config, "Study config JSON")->required();
  simulate->add_option("--out", sim.out, "Output directory");
  simulate->add_option("--seed", sim.seed, "Override the study seed");
  simulate->add_option("--replicates", sim.replicates, "Override replicates per cell");
  simulate->add_option("--threads", sim.threads, "Worker threads (default: EWOC_THREADS or all cores)");
  simulate->add_option("--backend", sim.backend, "Posterior backend")->check(CLI::IsMember({"quadrature", "metropolis"}));
  simulate->add_option("--estimator", sim.estimator, "MTD estimator")->check(CLI::IsMember({"median", "alpha"}));
  simulate->add_option("--set", sim.overrides, "Dotted override key=value, repeatable");
  simulate->add_flag("--quiet", sim.quiet, "No progress lines");

  CensusOptions cen;
  auto* census = app.add_subcommand("census", "Count grid doses inside the optimal MTD or toxicity interval");
  census->add_option("--kind", cen.kind, "mtd or tox")->check(CLI::IsMember({"mtd", "tox"}));
  census->add_option("--spacing", cen.spacings, "Grid spacing(s); default 0.05 0.10 0.20 0.25");
  census->add_option("--mtd", cen.mtds, "True MTD(s); default 0.2 0.4 0.6 0.8");
  census->add_option("--rho0", cen.rho0, "True P(DLT) at the minimum dose (tox kind)");
  census->add_option("--theta", cen.theta, "Target toxicity");
  census->add_option("--tox-halfwidth", cen.tox_halfwidth, "Optimal toxicity interval halfwidth");
  census->add_option("--mtd-factor", cen.mtd_factor, "Optimal MTD interval halfwidth as a fraction of the MTD");
  census->add_option("--link", cen.link, "True link family")->check(CLI::IsMember({"logistic", "normal", "skewnormal"}));
  census->add_option("--shape", cen.shape, "Skew-normal shape");
  census->add_option("--csv", cen.csv, "Also write the table as CSV");

  NextDoseOptions nd;
  auto* next_dose = app.add_subcommand("next-dose", "Print the next recommended dose for a trial snapshot");
  next_dose->add_option("snapshot,--config", nd.snapshot, "Trial snapshot JSON")->required();
  next_dose->add_flag("--commit", nd.commit, "Record --dlt for the current cohort dose and rewrite the snapshot");
  next_dose->add_option("--dlt", nd.dlt, "Outcome to record with --commit (0 or 1)");
  next_dose->add_flag("--json", nd.json_out, "JSON output");

  std::string estimate_path;
  auto* estimate = app.add_subcommand("estimate", "Print the MTD estimate for a trial snapshot");
  estimate->add_option("snapshot,--config", estimate_path, "Trial snapshot JSON")->required();

  ServeOptions srv;
  auto* serve = app.add_subcommand("serve", "Serve the trial API and UI");
  serve->add_option("--port", srv.port, "TCP port");
  serve->add_option("--host", srv.host, "Bind address");
  serve->add_option("--data-dir", srv.data_dir, "Directory of trial logs");
  serve->add_option("--ui-dir", srv.ui_dir, "Static UI assets served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return kExitUsage;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*census) return run_census(cen);
    if (*next_dose) return run_next_dose(nd);
    if (*estimate) return run_estimate(estimate_path);
    if (*serve) return run_serve(srv);
  } catch (const CliError& e) {
    std::cerr << e.body.dump() << "\n";
    return e.code;
  } catch (const ewoc::ValidationError& e) {
    std::cerr << json{{"error", "config"}, {"message", e.what()}, {"fields", ewoc::field_errors_json(e.errors())}}.dump()
              << "\n";
    return kExitUsage;
  } catch (const ewoc::IntegrityError& e) {
    std::cerr << json{{"error", "integrity"}, {"message", e.what()}}.dump() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "runtime"}, {"message", e.what()}}.dump() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
