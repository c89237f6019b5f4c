// cbp: command-line front end for the catalytic branching toolkit.
//
// Subcommands cover the analytic solvers (classify, malthus, extinction,
// taboo, phi) and the Monte Carlo side (simulate, verify). Every run writes a
// JSON report carrying enough metadata (model hash, seed, grids, tolerances,
// tool version) to reproduce it bit-identically; table-shaped results go to
// CSV files for plotting.
//
// Exit codes: 0 success; 1 validation/usage errors (every violated invariant
// listed); 2 numerical non-convergence (report still written, with residuals
// and flags).

#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbp/extinction.hpp"
#include "cbp/limit_laws.hpp"
#include "cbp/model.hpp"
#include "cbp/model_json.hpp"
#include "cbp/simulator.hpp"
#include "cbp/spectral.hpp"
#include "cbp/taboo.hpp"
#include "cbp/verify.hpp"

namespace {

using nlohmann::json;

constexpr const char* kToolVersion = "0.1.0";
constexpr int kSchemaVersion = 1;

struct RunConfig {
  std::string model_path;
  std::string out_path;
  std::string csv_path;
  std::string events_csv_path;
  std::uint64_t seed = 1;
  long reps = 1000;
  long paths = 64;
  double t_end = 0.0;
  std::vector<double> t_grid;
  double lambda_max = 0.0;  // 0: per-command default
  std::size_t grid_points = 0;
  double tol = 0.0;
  int threads = 1;
  std::vector<std::string> query_labels;
  std::string theorem;
  std::int64_t max_population = 1000000;
  std::int64_t max_events = 100000000;
};

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

json envelope(const std::string& command, const RunConfig& cfg,
              const cbp::ModelSpec& spec) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["tool_version"] = kToolVersion;
  doc["command"] = command;
  doc["model_path"] = cfg.model_path;
  doc["model_hash"] = cbp::model_hash(spec);
  doc["timestamp"] = utc_timestamp();
  return doc;
}

void write_report(const json& doc, const RunConfig& cfg) {
  const std::string text = doc.dump(2) + "\n";
  if (cfg.out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(cfg.out_path);
  if (!out) throw cbp::ValidationError({"cannot write '" + cfg.out_path + "'"});
  out << text;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw cbp::ValidationError({"cannot write '" + path + "'"});
  return out;
}

std::vector<cbp::State> resolve_states(const cbp::ValidatedModel& model,
                                       const std::vector<std::string>& labels) {
  std::vector<cbp::State> states;
  states.reserve(labels.size());
  for (const auto& l : labels) states.push_back(model.state_from_label(l));
  return states;
}

std::vector<double> uniform_grid(double t_end, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = t_end * static_cast<double>(i + 1) / static_cast<double>(n);
  return g;
}

// Shared grid policy: an explicit --t-grid wins; otherwise --t-end is split
// into `fallback_points` equal steps.
std::vector<double> time_grid(const RunConfig& cfg, std::size_t fallback_points,
                              const char* who) {
  if (!cfg.t_grid.empty()) {
    for (std::size_t i = 0; i + 1 < cfg.t_grid.size(); ++i)
      if (!(cfg.t_grid[i] < cfg.t_grid[i + 1]))
        throw cbp::ValidationError({"--t-grid must be strictly increasing"});
    if (cfg.t_grid.front() <= 0.0)
      throw cbp::ValidationError({"--t-grid times must be positive"});
    return cfg.t_grid;
  }
  if (cfg.t_end <= 0.0)
    throw cbp::ValidationError(
        {std::string(who) + " needs --t-end > 0 or an explicit --t-grid"});
  const std::size_t n = cfg.grid_points ? cfg.grid_points : fallback_points;
  return uniform_grid(cfg.t_end, n);
}

cbp::SimCaps sim_caps(const RunConfig& cfg) {
  cbp::SimCaps caps;
  caps.max_population = cfg.max_population;
  caps.max_events = cfg.max_events;
  return caps;
}

json criticality_json(const cbp::CriticalityReport& rep) {
  json j;
  j["rho0"] = rep.rho0;
  j["criticality"] = cbp::to_string(rep.cls);
  if (rep.nu) {
    j["nu"] = *rep.nu;
    j["u"] = rep.u;
    j["c_w"] = rep.c_w;
    j["bisection_width"] = rep.bisection_width;
  } else {
    j["nu"] = nullptr;
  }
  return j;
}

int run_classify(const RunConfig& cfg) {
  const cbp::ModelSpec spec = cbp::load_model_file(cfg.model_path);
  const auto model = cbp::ValidatedModel::validate(spec);
  const double tol = cfg.tol > 0.0 ? cfg.tol : 1e-10;
  const auto rep = cbp::criticality_report(model, tol);
  json doc = envelope("classify", cfg, spec);
  doc.update(criticality_json(rep));
  doc["tol"] = tol;
  write_report(doc, cfg);
  return 0;
}

int run_malthus(const RunConfig& cfg) {
  const cbp::ModelSpec spec = cbp::load_model_file(cfg.model_path);
  const auto model = cbp::ValidatedModel::validate(spec);
  const double tol = cfg.tol > 0.0 ? cfg.tol : 1e-10;
  const double nu = cbp::malthusian(model, tol);
  json doc = envelope("malthus", cfg, spec);
  doc["nu"] = nu;
  doc["tol"] = tol;
  write_report(doc, cfg);
  return 0;
}

int run_extinction(const RunConfig& cfg) {
  const cbp::ModelSpec spec = cbp::load_model_file(cfg.model_path);
  const auto model = cbp::ValidatedModel::validate(spec);
  const double tol = cfg.tol > 0.0 ? cfg.tol : 1e-12;
  const auto queries = resolve_states(model, cfg.query_labels);
  const auto rep = cbp::extinction_report(model, queries, tol);
  json doc = envelope("extinction", cfg, spec);
  doc["tol"] = tol;
  doc["rho0"] = rep.rho0;
  doc["transient"] = rep.transient;
  doc["phase"] = cbp::to_string(rep.phase);
  doc["q_w"] = rep.q_w;
  doc["Q_w"] = rep.Q_w;
  doc["q_iterations"] = rep.q_iterations;
  doc["Q_iterations"] = rep.Q_iterations;
  doc["q_residual"] = rep.q_residual;
  doc["Q_residual"] = rep.Q_residual;
  doc["mass_uncertainty"] = rep.mass_uncertainty;
  doc["converged"] = rep.converged;
  doc["query_states"] = cfg.query_labels;
  doc["q_x"] = rep.q_x;
  doc["Q_x"] = rep.Q_x;
  write_report(doc, cfg);
  return rep.converged ? 0 : 2;
}

int run_taboo(const RunConfig& cfg) {
  const cbp::ModelSpec spec = cbp::load_model_file(cfg.model_path);
  const auto model = cbp::ValidatedModel::validate(spec);
  std::vector<std::string> from_labels = cfg.query_labels;
  if (from_labels.empty()) from_labels.push_back(model.label_of(model.start()));
  const auto froms = resolve_states(model, from_labels);
  const double lambda_max = cfg.lambda_max > 0.0 ? cfg.lambda_max : 1.0;
  const std::size_t n_lambda = cfg.grid_points ? cfg.grid_points : 9;

  const auto trans = cbp::transience_report(model);
  json doc = envelope("taboo", cfg, spec);
  doc["definition"] =
      "value = E[exp(-lambda*T); T finite], T the first passage from -> to "
      "after leaving from, avoiding the other catalyst sites";
  doc["transient"] = trans.transient;
  doc["max_escape"] = trans.max_escape;
  doc["escape_tol"] = trans.tol;
  doc["lambda_max"] = lambda_max;
  doc["lambda_points"] = n_lambda;

  bool converged = true;
  json masses = json::array();
  std::ostringstream csv;
  csv << "from,to,lambda,value,uncertainty\n";
  for (std::size_t i = 0; i < froms.size(); ++i) {
    for (const auto& cat : model.catalysts()) {
      std::vector<cbp::State> taboo;
      for (const auto& other : model.catalysts())
        if (other.site != cat.site) taboo.push_back(other.site);
      cbp::TabooQuery query{froms[i], cat.site, taboo, 0.0};
      for (std::size_t g = 0; g < n_lambda; ++g) {
        query.lambda = lambda_max * static_cast<double>(g) /
                       static_cast<double>(n_lambda - 1 ? n_lambda - 1 : 1);
        const auto value = cbp::taboo_transform(model, query);
        converged = converged && value.converged;
        csv << from_labels[i] << ',' << model.label_of(cat.site) << ','
            << query.lambda << ',' << value.value << ',' << value.uncertainty
            << '\n';
        if (g == 0)
          masses.push_back({{"from", from_labels[i]},
                            {"to", model.label_of(cat.site)},
                            {"mass", value.value},
                            {"uncertainty", value.uncertainty},
                            {"window_radius", value.window_radius_used}});
      }
    }
  }
  doc["hitting_masses"] = std::move(masses);
  doc["converged"] = converged;
  if (!cfg.csv_path.empty()) {
    open_csv(cfg.csv_path) << csv.str();
    doc["csv"] = cfg.csv_path;
  }
  write_report(doc, cfg);
  return converged ? 0 : 2;
}

int run_phi(const RunConfig& cfg) {
  const cbp::ModelSpec spec = cbp::load_model_file(cfg.model_path);
  const auto model = cbp::ValidatedModel::validate(spec);
  const auto report = cbp::criticality_report(model);
  cbp::PhiOptions options;
  if (cfg.lambda_max > 0.0) options.lambda_max = cfg.lambda_max;
  if (cfg.grid_points > 0) options.grid_points = cfg.grid_points;
  if (cfg.tol > 0.0) options.tol = cfg.tol;
  const auto queries = resolve_states(model, cfg.query_labels);
  const auto phi = cbp::solve_phi(model, report, queries, options);

  json doc = envelope("phi", cfg, spec);
  doc.update(criticality_json(report));
  doc["lambda_max"] = options.lambda_max;
  doc["lambda_min"] = options.lambda_min;
  doc["grid_points"] = options.grid_points;
  doc["tol"] = options.tol;
  doc["Q_w"] = phi.Q_w;
  doc["residual"] = phi.residual;
  doc["iterations"] = phi.iterations;
  doc["converged"] = phi.converged;
  doc["query_states"] = cfg.query_labels;
  doc["deriv0_x"] = phi.deriv0_x;
  if (!cfg.csv_path.empty()) {
    auto csv = open_csv(cfg.csv_path);
    csv << "lambda";
    for (const auto& cat : model.catalysts())
      csv << ",phi_w_" << model.label_of(cat.site);
    for (const auto& l : cfg.query_labels) csv << ",phi_x_" << l;
    csv << '\n';
    csv.precision(17);
    for (std::size_t g = 0; g < phi.lambda_grid.size(); ++g) {
      csv << phi.lambda_grid[g];
      for (const auto& column : phi.phi_w) csv << ',' << column[g];
      for (const auto& column : phi.phi_x) csv << ',' << column[g];
      csv << '\n';
    }
    doc["csv"] = cfg.csv_path;
  }
  write_report(doc, cfg);
  return phi.converged ? 0 : 2;
}

int run_simulate(const RunConfig& cfg) {
  const cbp::ModelSpec spec = cbp::load_model_file(cfg.model_path);
  const auto model = cbp::ValidatedModel::validate(spec);
  const auto grid = time_grid(cfg, 65, "simulate");
  const auto y_list = resolve_states(model, cfg.query_labels);
  const auto caps = sim_caps(cfg);

  std::optional<std::ofstream> events_out;
  std::optional<cbp::EventSink> sink;
  if (!cfg.events_csv_path.empty()) {
    events_out = open_csv(cfg.events_csv_path);
    *events_out << "time,kind,site,dest,particle,offspring\n";
    events_out->precision(17);
    sink = [&](const cbp::ParticleEvent& e) {
      const char* kind = e.kind == cbp::EventKind::jump     ? "jump"
                         : e.kind == cbp::EventKind::branch ? "branch"
                                                            : "depart";
      *events_out << e.time << ',' << kind << ',' << model.label_of(e.site)
                  << ',' << model.label_of(e.dest) << ',' << e.particle << ','
                  << e.offspring << '\n';
    };
  }
  const auto traj = cbp::simulate(model, grid, y_list, cfg.seed, caps,
                                  sink ? &*sink : nullptr);

  json doc = envelope("simulate", cfg, spec);
  doc["seed"] = cfg.seed;
  doc["t_grid"] = grid;
  doc["query_states"] = cfg.query_labels;
  doc["max_population"] = caps.max_population;
  doc["max_events"] = caps.max_events;
  doc["events"] = traj.events;
  doc["pop_cap_hit"] = traj.pop_cap_hit;
  doc["event_cap_hit"] = traj.event_cap_hit;
  doc["final_total"] = traj.total.back();
  if (!cfg.events_csv_path.empty()) doc["events_csv"] = cfg.events_csv_path;
  if (!cfg.csv_path.empty()) {
    auto csv = open_csv(cfg.csv_path);
    csv << "t,total";
    for (const auto& l : cfg.query_labels) csv << ",local_" << l;
    csv << '\n';
    csv.precision(17);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      csv << grid[g] << ',' << traj.total[g];
      for (const auto& column : traj.local) csv << ',' << column[g];
      csv << '\n';
    }
    doc["csv"] = cfg.csv_path;
  }
  write_report(doc, cfg);
  return 0;
}

// 99% two-sided normal band around the predicted probability, widened by the
// 1/R discreteness of the empirical frequency.
json probability_band(double predicted, double freq, long R) {
  const double se =
      std::sqrt(std::max(predicted * (1.0 - predicted), 0.0) /
                static_cast<double>(R)) +
      1.0 / static_cast<double>(R);
  const double half = 2.5758293035489004 * se;
  json j;
  j["predicted"] = predicted;
  j["freq"] = freq;
  j["se"] = se;
  j["ci99_lo"] = predicted - half;
  j["ci99_hi"] = predicted + half;
  j["within"] = freq >= predicted - half && freq <= predicted + half;
  j["ci_halfwidth"] = half;
  return j;
}

int run_verify(const RunConfig& cfg) {
  const cbp::ModelSpec spec = cbp::load_model_file(cfg.model_path);
  const auto model = cbp::ValidatedModel::validate(spec);
  const auto caps = sim_caps(cfg);

  json doc = envelope("verify", cfg, spec);
  doc["theorem"] = cfg.theorem;
  doc["seed"] = cfg.seed;
  doc["threads"] = cfg.threads;
  doc["max_population"] = caps.max_population;
  doc["max_events"] = caps.max_events;

  std::string verdict;
  bool converged = true;

  if (cfg.theorem == "q" || cfg.theorem == "Q") {
    auto grid = time_grid(cfg, 2, "verify");
    std::vector<cbp::State> y_list = resolve_states(model, cfg.query_labels);
    if (cfg.theorem == "Q")
      for (const auto& cat : model.catalysts()) {
        bool present = false;
        for (auto y : y_list) present = present || y == cat.site;
        if (!present) y_list.push_back(cat.site);
      }
    const auto stats = cbp::run_ensemble(model, grid, y_list, cfg.reps,
                                         cfg.seed, caps, cfg.threads);
    const long R = stats.replicates;
    double freq = 0.0;
    double predicted = 0.0;
    if (cfg.theorem == "q") {
      const auto q_res = cbp::solve_q(model);
      converged = q_res.converged;
      predicted = cbp::q_at(model, q_res.values, model.start());
      long extinct = 0;
      for (auto v : stats.final_total) extinct += v == 0;
      freq = static_cast<double>(extinct) / static_cast<double>(R);
      doc["statistic"] = "frequency of global extinction at t_end";
    } else {
      const auto Q_res = cbp::solve_Q(model);
      converged = Q_res.converged;
      predicted = cbp::Q_at(model, Q_res.values, model.start());
      // Locally extinct replicate: zero particles on the catalyst set. The
      // y-list was extended above so all catalyst sites are tracked.
      long extinct = 0;
      for (std::size_t r = 0; r < stats.final_total.size(); ++r) {
        std::int64_t on_catalysts = 0;
        for (std::size_t i = 0; i < y_list.size(); ++i)
          if (model.catalyst_index(y_list[i]))
            on_catalysts += stats.final_local[i][r];
        extinct += on_catalysts == 0;
      }
      freq = static_cast<double>(extinct) / static_cast<double>(R);
      doc["statistic"] = "frequency of catalyst-set extinction at t_end";
    }
    json band = probability_band(predicted, freq, R);
    doc["reps"] = R;
    doc["t_grid"] = grid;
    doc["truncated"] = stats.truncated;
    doc["extinction"] = band;
    if (band["ci_halfwidth"].get<double>() > 0.05)
      verdict = "INCONCLUSIVE";
    else
      verdict = band["within"].get<bool>() ? "PASS" : "FAIL";
  } else if (cfg.theorem == "strong" || cfg.theorem == "weak") {
    const auto report = cbp::criticality_report(model);
    if (report.cls != cbp::Criticality::supercritical) {
      std::cerr << "cbp verify: model not supercritical (rho(D(0)) = "
                << report.rho0
                << "); the strong/weak limit checks require rho(D(0)) > 1\n";
      return 1;
    }
    std::vector<cbp::State> y_list = resolve_states(model, cfg.query_labels);
    if (y_list.empty()) y_list.push_back(model.start());

    if (cfg.theorem == "strong") {
      const auto grid = time_grid(cfg, 33, "verify");
      const auto paths = cbp::collect_survivor_paths(
          model, grid, y_list, static_cast<std::size_t>(cfg.paths), cfg.seed,
          caps);
      cbp::EnsembleStats no_stats;
      const auto rep = cbp::verify_strong_proxy(model, no_stats, paths);
      doc["paths_wanted"] = cfg.paths;
      doc["paths"] = rep.paths;
      doc["t_grid"] = grid;
      doc["refused"] = rep.refused;
      doc["failed_hypotheses"] = rep.failed_hypotheses;
      doc["median_tail_oscillation"] = rep.median_tail_oscillation;
      doc["median_final_spread"] = rep.median_final_spread;
      doc["max_final_spread"] = rep.max_final_spread;
      doc["co_converged"] = rep.co_converged;
      doc["rank_correlation"] = rep.rank_correlation;
      doc["rank_checked"] = rep.rank_checked;
      doc["failed_checks"] = rep.failed_checks;
      verdict = rep.verdict;
      if (!cfg.csv_path.empty()) {
        auto csv = open_csv(cfg.csv_path);
        csv << "path,tail_oscillation\n";
        csv.precision(17);
        for (std::size_t p = 0; p < rep.tail_oscillation.size(); ++p)
          csv << p << ',' << rep.tail_oscillation[p] << '\n';
        doc["csv"] = cfg.csv_path;
      }
    } else {
      auto grid = cfg.t_grid;
      if (grid.empty()) {
        if (cfg.t_end <= 0.0)
          throw cbp::ValidationError(
              {"verify needs --t-end > 0 or an explicit --t-grid"});
        grid = {0.5 * cfg.t_end, 0.75 * cfg.t_end, cfg.t_end};
      }
      std::vector<cbp::State> queries;
      if (!model.catalyst_index(model.start()))
        queries.push_back(model.start());
      cbp::PhiOptions options;
      if (cfg.lambda_max > 0.0) options.lambda_max = cfg.lambda_max;
      if (cfg.tol > 0.0) options.tol = cfg.tol;
      const auto phi = cbp::solve_phi(model, report, queries, options);
      converged = phi.converged;
      const auto stats = cbp::run_ensemble(model, grid, y_list, cfg.reps,
                                           cfg.seed, caps, cfg.threads);
      const auto rep = cbp::verify_weak(model, stats, phi);
      doc["reps"] = stats.replicates;
      doc["t_grid"] = grid;
      doc["truncated"] = stats.truncated;
      doc["refused"] = rep.refused;
      doc["failed_hypotheses"] = rep.failed_hypotheses;
      doc["t1"] = rep.t1;
      doc["t2"] = rep.t2;
      doc["ks_stat"] = rep.ks_stat;
      doc["ks_bound"] = rep.ks_bound;
      doc["ks_ok"] = rep.ks_ok;
      doc["transform_max_dev_over_se"] = rep.transform.max_dev_over_se;
      doc["transform_within_3se"] = rep.transform.within_3se;
      doc["atom_freq"] = rep.transform.atom_freq;
      doc["atom_lo"] = rep.transform.atom_lo;
      doc["atom_hi"] = rep.transform.atom_hi;
      doc["atom_ok"] = rep.transform.atom_ok;
      doc["rank_correlation"] = rep.rank_correlation;
      doc["rank_checked"] = rep.rank_checked;
      doc["survivors"] = rep.survivors;
      doc["failed_checks"] = rep.failed_checks;
      verdict = rep.verdict;
      if (!cfg.csv_path.empty()) {
        auto csv = open_csv(cfg.csv_path);
        csv << "lambda,empirical,analytic,combined_se\n";
        csv.precision(17);
        for (std::size_t i = 0; i < rep.transform.lambdas.size(); ++i)
          csv << rep.transform.lambdas[i] << ',' << rep.transform.empirical[i]
              << ',' << rep.transform.analytic[i] << ','
              << rep.transform.combined_se[i] << '\n';
        doc["csv"] = cfg.csv_path;
      }
    }
  } else {
    throw cbp::ValidationError(
        {"--theorem must be one of q, Q, strong, weak"});
  }

  doc["verdict"] = verdict;
  doc["converged"] = converged;
  write_report(doc, cfg);
  return converged ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"catalytic branching process toolkit"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--model", cfg.model_path, "model JSON file")
        ->required();
    sub->add_option("--out", cfg.out_path,
                    "JSON report path (default: stdout)");
    sub->add_option("--tol", cfg.tol, "solver tolerance");
  };
  auto add_sim_opts = [&](CLI::App* sub) {
    sub->add_option("--t-end", cfg.t_end, "last sample time");
    sub->add_option("--t-grid", cfg.t_grid, "explicit sample times")
        ->delimiter(',');
    sub->add_option("--grid-points", cfg.grid_points,
                    "sample count for --t-end grids");
    sub->add_option("--query-states", cfg.query_labels,
                    "state labels for local counts")
        ->delimiter(',');
    sub->add_option("--threads", cfg.threads, "replicate worker count");
    sub->add_option("--max-population", cfg.max_population,
                    "population cap per trajectory");
    sub->add_option("--max-events", cfg.max_events,
                    "event cap per trajectory");
    sub->add_option("--csv", cfg.csv_path, "CSV table output path");
  };

  CLI::App* classify = app.add_subcommand(
      "classify", "criticality class and growth exponent");
  add_common(classify);

  CLI::App* malthus =
      app.add_subcommand("malthus", "growth exponent of the mean");
  add_common(malthus);

  CLI::App* extinction = app.add_subcommand(
      "extinction", "global and local extinction probabilities");
  add_common(extinction);
  extinction
      ->add_option("--query-states", cfg.query_labels,
                   "extra start states to evaluate")
      ->delimiter(',');

  CLI::App* taboo = app.add_subcommand(
      "taboo", "first-passage transforms to the catalyst sites");
  add_common(taboo);
  taboo
      ->add_option("--query-states", cfg.query_labels,
                   "start states (default: model start)")
      ->delimiter(',');
  taboo->add_option("--lambda-max", cfg.lambda_max, "largest frequency");
  taboo->add_option("--grid-points", cfg.grid_points, "frequency count");
  taboo->add_option("--csv", cfg.csv_path, "CSV table output path");

  CLI::App* phi = app.add_subcommand(
      "phi", "limit-variable Laplace transform on a frequency grid");
  add_common(phi);
  phi->add_option("--lambda-max", cfg.lambda_max, "largest frequency");
  phi->add_option("--grid-points", cfg.grid_points, "frequency count");
  phi->add_option("--query-states", cfg.query_labels,
                  "off-catalyst states to evaluate")
      ->delimiter(',');
  phi->add_option("--csv", cfg.csv_path, "CSV table output path");

  CLI::App* simulate =
      app.add_subcommand("simulate", "single event-driven trajectory");
  add_common(simulate);
  add_sim_opts(simulate);
  simulate->add_option("--seed", cfg.seed, "RNG seed")->required();
  simulate->add_option("--events-csv", cfg.events_csv_path,
                       "CSV event log output path");

  CLI::App* verify = app.add_subcommand(
      "verify", "Monte Carlo verdicts for the limit statements");
  add_common(verify);
  add_sim_opts(verify);
  verify->add_option("--seed", cfg.seed, "RNG seed (recorded in the report)")
      ->required();
  verify
      ->add_option("--theorem", cfg.theorem,
                   "which statement to check: q, Q, strong, weak")
      ->required()
      ->check(CLI::IsMember({"q", "Q", "strong", "weak"}));
  verify->add_option("--reps", cfg.reps, "ensemble replicates");
  verify->add_option("--paths", cfg.paths,
                     "survivor paths for the strong proxy");
  verify->add_option("--lambda-max", cfg.lambda_max,
                     "largest frequency for the weak transform");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(classify)) return run_classify(cfg);
    if (app.got_subcommand(malthus)) return run_malthus(cfg);
    if (app.got_subcommand(extinction)) return run_extinction(cfg);
    if (app.got_subcommand(taboo)) return run_taboo(cfg);
    if (app.got_subcommand(phi)) return run_phi(cfg);
    if (app.got_subcommand(simulate)) return run_simulate(cfg);
    if (app.got_subcommand(verify)) return run_verify(cfg);
  } catch (const cbp::ValidationError& e) {
    for (const auto& issue : e.issues()) std::cerr << "cbp: " << issue << '\n';
    return 1;
  } catch (const cbp::PreconditionError& e) {
    std::cerr << "cbp: " << e.what() << '\n';
    return 1;
  } catch (const cbp::ConvergenceError& e) {
    std::cerr << "cbp: " << e.what() << " (residual " << e.residual() << ")\n";
    return 2;
  }
  return 1;
}
