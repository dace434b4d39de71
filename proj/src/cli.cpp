#include "coalinla/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "coalinla/coalescent.hpp"
#include "coalinla/genealogy.hpp"
#include "coalinla/inla.hpp"
#include "coalinla/mcmc.hpp"
#include "coalinla/simulate.hpp"
#include "coalinla/trajectory.hpp"

namespace coalinla::cli {

namespace {

using json = nlohmann::json;

// Configuration problem: reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input that cannot be read or parsed: also exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<SamplingEvent> parse_sampling(const std::string& text) {
  std::vector<SamplingEvent> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError("sampling entry '" + item + "' is not age:count");
    try {
      std::size_t used_age = 0;
      std::size_t used_count = 0;
      const std::string age_text = item.substr(0, colon);
      const std::string count_text = item.substr(colon + 1);
      SamplingEvent e{std::stod(age_text, &used_age), std::stoi(count_text, &used_count)};
      if (used_age != age_text.size() || used_count != count_text.size()) throw std::invalid_argument(item);
      if (!(e.age >= 0.0) || e.count < 0) throw std::invalid_argument(item);
      out.push_back(e);
    } catch (const std::logic_error&) {
      throw UsageError("sampling entry '" + item + "' is not age:count with age >= 0, count >= 0");
    }
  }
  return out;
}

Trajectory trajectory_for(const RunConfig& c) {
  if (c.scenario == "constant") return Trajectory::constant(1.0);
  if (c.scenario == "exponential") return Trajectory::exponential(25.0, 5.0);
  if (c.scenario == "boombust") return Trajectory::boom_bust();
  if (c.scenario == "custom") {
    try {
      return Trajectory::piecewise_constant(c.boundaries, c.values);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("custom scenario: ") + e.what());
    }
  }
  throw UsageError("unknown scenario '" + c.scenario + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open input file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void validate_inference_options(const RunConfig& c) {
  if (c.model != "cggp" && c.model != "rggp") throw UsageError("--model must be cggp or rggp");
  if (c.model == "rggp" && c.grid_size < 2) throw UsageError("rggp requires --grid-size >= 2");
  if (c.strategy != "gaussian" && c.strategy != "laplace") throw UsageError("--strategy must be gaussian or laplace");
  if (c.format != "csv" && c.format != "json") throw UsageError("--format must be csv or json");
  if (!(c.tau_alpha > 0.0) || !(c.tau_beta > 0.0)) throw UsageError("tau prior needs alpha, beta > 0");
  if (c.input.empty()) throw UsageError("--in is required");
}

CellStats load_cells(const RunConfig& c) {
  Genealogy g = [&] {
    try {
      return parse_newick(read_file(c.input));
    } catch (const NewickError& e) {
      throw InputError(c.input + ": " + e.what());
    }
  }();
  CoalescentData data = [&] {
    try {
      return extract_coalescent_data(g);
    } catch (const std::invalid_argument& e) {
      throw InputError(c.input + ": " + e.what());
    }
  }();
  return c.model == "rggp" ? build_cells_rggp(data, c.grid_size) : build_cells_cggp(data);
}

ModelOptions model_options(const RunConfig& c) {
  ModelOptions o;
  o.strategy = c.strategy == "laplace" ? Strategy::laplace : Strategy::gaussian;
  o.tau_prior = {c.tau_alpha, c.tau_beta};
  return o;
}

McmcConfig mcmc_config(const RunConfig& c) {
  McmcConfig m;
  m.iterations = c.iterations;
  m.burn_in = c.burn_in;
  m.thin = c.thin;
  m.seed = c.seed;
  m.tau_prior = {c.tau_alpha, c.tau_beta};
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("mcmc settings: ") + e.what());
  }
  return m;
}

struct Row {
  double time, median, lower, upper, mean;
};

std::vector<Row> rows_from(const PosteriorSummary& s, bool natural) {
  std::vector<Row> rows;
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    if (natural) {
      rows.push_back({s.times[i], std::exp(s.median[i]), std::exp(s.lower95[i]), std::exp(s.upper95[i]),
                      s.mean_natural[i]});
    } else {
      rows.push_back({s.times[i], s.median[i], s.lower95[i], s.upper95[i], s.mean[i]});
    }
  }
  return rows;
}

std::vector<Row> rows_from(const McmcOutput& m, std::span<const double> times, bool natural) {
  std::vector<Row> rows;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (natural) {
      double acc = 0.0;
      for (std::size_t d = 0; d < m.draws(); ++d) acc += std::exp(m.gamma(d, i));
      rows.push_back({times[i], std::exp(m.median[i]), std::exp(m.lower95[i]), std::exp(m.upper95[i]),
                      acc / static_cast<double>(m.draws())});
    } else {
      rows.push_back({times[i], m.median[i], m.lower95[i], m.upper95[i], m.mean[i]});
    }
  }
  return rows;
}

std::string summary_csv(const std::vector<Row>& rows) {
  std::string out = "time,median,lower95,upper95,mean\r\n";
  for (const auto& r : rows) {
    out += format_number(r.time) + "," + format_number(r.median) + "," + format_number(r.lower) + "," +
           format_number(r.upper) + "," + format_number(r.mean) + "\r\n";
  }
  return out;
}

json rows_json(const std::vector<Row>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"time", r.time}, {"median", r.median}, {"lower95", r.lower}, {"upper95", r.upper}, {"mean", r.mean}});
  }
  return arr;
}

std::string tau_csv(const TauGrid& grid) {
  std::string out = "log_tau,log_density,weight\r\n";
  for (std::size_t g = 0; g < grid.log_tau_values.size(); ++g) {
    out += format_number(grid.log_tau_values[g]) + "," + format_number(grid.log_densities[g]) + "," +
           format_number(grid.weights[g]) + "\r\n";
  }
  return out;
}

json tau_json(const TauGrid& grid) {
  json arr = json::array();
  for (std::size_t g = 0; g < grid.log_tau_values.size(); ++g) {
    arr.push_back({{"log_tau", grid.log_tau_values[g]}, {"log_density", grid.log_densities[g]}, {"weight", grid.weights[g]}});
  }
  return {{"points", arr}, {"mode_log_tau", grid.mode_log_tau}, {"sd_log_tau", grid.sd_log_tau}, {"monotone", grid.monotone}};
}

void emit(const RunConfig& c, const std::string& content, std::ostream& out) {
  if (c.output.empty()) {
    out << content;
  } else {
    write_file(c.output, content);
  }
}

// Total variation between the INLA tau grid weights and MCMC log-tau draws binned
// on cells of one grid step centred on each grid point.
double tau_discrepancy(const TauGrid& grid, std::span<const double> tau_draws) {
  const std::size_t m = grid.log_tau_values.size();
  if (m == 0 || tau_draws.empty()) return 1.0;
  const double step = m > 1 ? grid.log_tau_values[1] - grid.log_tau_values[0] : kGridStepInSd * grid.sd_log_tau;
  std::vector<double> freq(m, 0.0);
  double outside = 0.0;
  const double first = grid.log_tau_values.front() - 0.5 * step;
  for (const double tau : tau_draws) {
    const double pos = (std::log(tau) - first) / step;
    if (pos < 0.0 || pos >= static_cast<double>(m)) {
      outside += 1.0;
    } else {
      freq[static_cast<std::size_t>(pos)] += 1.0;
    }
  }
  const double total = static_cast<double>(tau_draws.size());
  double tv = outside / total;
  for (std::size_t g = 0; g < m; ++g) tv += std::abs(grid.weights[g] - freq[g] / total);
  return 0.5 * tv;
}

}  // namespace

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

int cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  std::vector<SamplingEvent> sampling =
      c.sampling.empty() ? std::vector<SamplingEvent>{{0.0, c.n}} : parse_sampling(c.sampling);
  int total = 0;
  bool present = false;
  for (const auto& s : sampling) {
    total += s.count;
    present = present || (s.age == 0.0 && s.count > 0);
  }
  if (total < 2) throw UsageError("simulate requires n >= 2 samples (got " + std::to_string(total) + ")");
  if (!present) throw UsageError("simulate requires at least one sample at age 0");
  const Trajectory trajectory = trajectory_for(c);

  const Genealogy g = simulate(trajectory, sampling, c.seed);
  const std::string newick = serialize_newick(g) + "\n";
  std::ostringstream summary;
  summary << "simulated n=" << g.n_tips() << " height=" << format_number(g.height())
          << " scenario=" << c.scenario << " seed=" << c.seed << "\n";
  if (c.output.empty()) {
    out << newick;
    err << summary.str();
  } else {
    write_file(c.output, newick);
    out << summary.str();
  }
  return kExitOk;
}

int cmd_infer(const RunConfig& c, std::ostream& out, std::ostream& err) {
  validate_inference_options(c);
  const CellStats cells = load_cells(c);
  const auto start = std::chrono::steady_clock::now();
  const PosteriorSummary summary = infer(cells, model_options(c));
  const double wall = seconds_since(start);

  const auto flagged = std::count(summary.prior_only.begin(), summary.prior_only.end(), true);
  if (flagged > 0) err << "warning: " << flagged << " cell(s) have zero coalescent exposure; their marginals reflect the prior only\n";

  const auto rows = rows_from(summary, c.natural_scale);
  if (c.format == "json") {
    json doc = {{"model", c.model},
                {"strategy", to_string(summary.strategy)},
                {"scale", c.natural_scale ? "natural" : "log"},
                {"cells", rows_json(rows)},
                {"prior_only", summary.prior_only},
                {"tau", tau_json(summary.tau_grid)},
                {"wall_time_seconds", wall}};
    if (c.model == "rggp") doc["grid_size"] = c.grid_size;
    emit(c, doc.dump(2) + "\n", out);
  } else {
    emit(c, summary_csv(rows), out);
    if (!c.output.empty()) write_file(c.output + ".tau.csv", tau_csv(summary.tau_grid));
  }
  err << "inference finished: model=" << c.model << " strategy=" << to_string(summary.strategy)
      << " cells=" << cells.size() << " wall_time=" << wall << "s\n";
  return kExitOk;
}

int cmd_mcmc(const RunConfig& c, std::ostream& out, std::ostream& err) {
  validate_inference_options(c);
  const McmcConfig config = mcmc_config(c);
  const CellStats cells = load_cells(c);
  const auto start = std::chrono::steady_clock::now();
  const McmcOutput chain = run_mcmc(cells, config);
  const double wall = seconds_since(start);

  const auto rows = rows_from(chain, cells.midpoints, c.natural_scale);
  if (c.format == "json") {
    json doc = {{"model", c.model},
                {"scale", c.natural_scale ? "natural" : "log"},
                {"cells", rows_json(rows)},
                {"acceptance_rate", chain.acceptance_rate},
                {"ess_tau", chain.ess_tau},
                {"kept_draws", chain.draws()},
                {"tau_draws", chain.tau_samples},
                {"wall_time_seconds", wall}};
    emit(c, doc.dump(2) + "\n", out);
  } else {
    emit(c, summary_csv(rows), out);
    if (!c.output.empty()) {
      std::string tau = "tau\r\n";
      for (const double t : chain.tau_samples) tau += format_number(t) + "\r\n";
      write_file(c.output + ".tau.csv", tau);
    }
  }
  err << "mcmc finished: draws=" << chain.draws() << " acceptance_rate=" << chain.acceptance_rate
      << " ess_tau=" << chain.ess_tau << " wall_time=" << wall << "s\n";
  return kExitOk;
}

int cmd_compare(const RunConfig& c, std::ostream& out, std::ostream& err) {
  validate_inference_options(c);
  const McmcConfig config = mcmc_config(c);
  const CellStats cells = load_cells(c);
  const ModelOptions options = model_options(c);

  auto inla_job = std::async(std::launch::async, [&] {
    const auto start = std::chrono::steady_clock::now();
    auto summary = infer(cells, options);
    return std::make_pair(std::move(summary), seconds_since(start));
  });
  const auto mcmc_start = std::chrono::steady_clock::now();
  const McmcOutput chain = run_mcmc(cells, config);
  const double mcmc_wall = seconds_since(mcmc_start);
  const auto [inla, inla_wall] = inla_job.get();

  const std::size_t b = cells.size();
  double max_gap = 0.0;
  std::size_t overlaps = 0;
  std::string csv = "time,inla_median,inla_lo,inla_hi,mcmc_median,mcmc_lo,mcmc_hi\r\n";
  json rows = json::array();
  for (std::size_t i = 0; i < b; ++i) {
    max_gap = std::max(max_gap, std::abs(inla.median[i] - chain.median[i]));
    if (inla.lower95[i] <= chain.upper95[i] && chain.lower95[i] <= inla.upper95[i]) ++overlaps;
    auto v = [&](double x) { return c.natural_scale ? std::exp(x) : x; };
    csv += format_number(cells.midpoints[i]) + "," + format_number(v(inla.median[i])) + "," +
           format_number(v(inla.lower95[i])) + "," + format_number(v(inla.upper95[i])) + "," +
           format_number(v(chain.median[i])) + "," + format_number(v(chain.lower95[i])) + "," +
           format_number(v(chain.upper95[i])) + "\r\n";
    rows.push_back({{"time", cells.midpoints[i]},
                    {"inla_median", v(inla.median[i])}, {"inla_lo", v(inla.lower95[i])}, {"inla_hi", v(inla.upper95[i])},
                    {"mcmc_median", v(chain.median[i])}, {"mcmc_lo", v(chain.lower95[i])}, {"mcmc_hi", v(chain.upper95[i])}});
  }
  const double overlap_fraction = static_cast<double>(overlaps) / static_cast<double>(b);
  const double tau_tv = tau_discrepancy(inla.tau_grid, chain.tau_samples);

  std::ostringstream block;
  block << "cells=" << b << "\n"
        << "max_median_gap=" << format_number(max_gap) << "\n"
        << "interval_overlap_fraction=" << format_number(overlap_fraction) << "\n"
        << "tau_total_variation=" << format_number(tau_tv) << "\n"
        << "mcmc_acceptance_rate=" << format_number(chain.acceptance_rate) << "\n"
        << "mcmc_ess_tau=" << format_number(chain.ess_tau) << "\n";

  if (c.format == "json") {
    json doc = {{"model", c.model},
                {"strategy", c.strategy},
                {"scale", c.natural_scale ? "natural" : "log"},
                {"cells", rows},
                {"summary",
                 {{"max_median_gap", max_gap},
                  {"interval_overlap_fraction", overlap_fraction},
                  {"tau_total_variation", tau_tv},
                  {"mcmc_acceptance_rate", chain.acceptance_rate},
                  {"mcmc_ess_tau", chain.ess_tau}}},
                {"wall_time_seconds", {{"inla", inla_wall}, {"mcmc", mcmc_wall}}}};
    emit(c, doc.dump(2) + "\n", out);
  } else {
    emit(c, csv, out);
    if (!c.output.empty()) write_file(c.output + ".summary.txt", block.str());
  }
  // Without --out the report itself occupies stdout, so the summary goes to stderr.
  std::ostream& console = c.output.empty() ? err : out;
  console << block.str() << "inla_wall_time_seconds=" << inla_wall << "\n"
          << "mcmc_wall_time_seconds=" << mcmc_wall << "\n";
  return kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  // A JSON --config file is expanded into flags placed before the user's flags;
  // with take-last semantics the explicit flags win.
  std::vector<std::string> args(argv, argv + argc);
  std::vector<std::string> expanded;
  try {
    for (std::size_t i = 1; i < args.size(); ++i) {
      std::string path;
      const std::size_t first = i;
      if (args[i] == "--config" && i + 1 < args.size()) {
        path = args[++i];
      } else if (args[i].rfind("--config=", 0) == 0) {
        path = args[i].substr(9);
      } else {
        continue;
      }
      const json doc = json::parse(read_file(path));
      if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
      for (const auto& [key, value] : doc.items()) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (value.is_boolean()) {
          if (value.get<bool>()) expanded.push_back(flag);
        } else if (value.is_array()) {
          std::string joined;
          for (const auto& item : value) {
            if (!joined.empty()) joined += ",";
            joined += item.is_string() ? item.get<std::string>() : item.dump();
          }
          expanded.push_back(flag);
          expanded.push_back(joined);
        } else {
          expanded.push_back(flag);
          expanded.push_back(value.is_string() ? value.get<std::string>() : value.dump());
        }
      }
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(first), args.begin() + static_cast<std::ptrdiff_t>(i) + 1);
      break;
    }
  } catch (const std::exception& e) {
    err << "error: config: " << e.what() << "\n";
    return kExitUsage;
  }
  if (!expanded.empty()) {
    // Config flags go right after the subcommand name, ahead of the explicit ones.
    const auto sub = std::find_if(args.begin() + 1, args.end(), [](const std::string& a) { return a.rfind("-", 0) != 0; });
    args.insert(sub == args.end() ? args.end() : sub + 1, expanded.begin(), expanded.end());
  }

  RunConfig config;
  CLI::App app{"Effective population size inference from a fixed genealogy"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.add_option("--config", "JSON file mirroring the flags (flags win on conflict)");

  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate a genealogy under a demographic scenario");
  auto* infer_cmd = app.add_subcommand("infer", "INLA posterior of log N_e(t) for a Newick genealogy");
  auto* mcmc_cmd = app.add_subcommand("mcmc", "MCMC posterior of log N_e(t) for a Newick genealogy");
  auto* compare_cmd = app.add_subcommand("compare", "Run INLA and MCMC on the same genealogy and compare");

  simulate_cmd->add_option("--scenario", config.scenario, "constant | exponential | boombust | custom")
      ->check(CLI::IsMember({"constant", "exponential", "boombust", "custom"}));
  simulate_cmd->add_option("--n", config.n, "Number of samples at age 0");
  simulate_cmd->add_option("--sampling", config.sampling, "Heterochronous schedule age:count,... (overrides --n)");
  simulate_cmd->add_option("--boundaries", config.boundaries, "Custom scenario change points")->delimiter(',');
  simulate_cmd->add_option("--values", config.values, "Custom scenario sizes (one more than boundaries)")->delimiter(',');
  simulate_cmd->add_option("--seed", config.seed, "Random seed");
  simulate_cmd->add_option("--out", config.output, "Output Newick file (stdout if omitted)");

  for (auto* sub : {infer_cmd, mcmc_cmd, compare_cmd}) {
    sub->add_option("--in", config.input, "Input Newick file");
    sub->add_option("--out", config.output, "Output file (stdout if omitted)");
    sub->add_option("--model", config.model, "cggp | rggp");
    sub->add_option("--grid-size", config.grid_size, "Number of regular-grid cells (rggp)");
    sub->add_option("--format", config.format, "csv | json");
    sub->add_flag("--natural-scale", config.natural_scale, "Report N_e instead of log N_e");
    sub->add_option("--tau-alpha", config.tau_alpha, "Gamma prior shape for tau");
    sub->add_option("--tau-beta", config.tau_beta, "Gamma prior rate for tau");
  }
  for (auto* sub : {infer_cmd, compare_cmd}) {
    sub->add_option("--strategy", config.strategy, "gaussian | laplace");
  }
  for (auto* sub : {mcmc_cmd, compare_cmd}) {
    sub->add_option("--iterations", config.iterations, "Chain length");
    sub->add_option("--burn-in", config.burn_in, "Discarded initial iterations");
    sub->add_option("--thin", config.thin, "Keep every thin-th draw");
    sub->add_option("--seed", config.seed, "Random seed");
  }

  std::vector<const char*> raw;
  raw.reserve(args.size());
  for (const auto& a : args) raw.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (simulate_cmd->parsed()) return cmd_simulate(config, out, err);
    if (infer_cmd->parsed()) return cmd_infer(config, out, err);
    if (mcmc_cmd->parsed()) return cmd_mcmc(config, out, err);
    if (compare_cmd->parsed()) return cmd_compare(config, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InferenceError& e) {
    err << "error: inference failed in stage '" << e.stage() << "': " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace coalinla::cli
