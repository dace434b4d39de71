#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace coalinla::cli {

struct RunConfig {
  std::string command;
  std::string input;
  std::string output;
  std::string model = "cggp";
  int grid_size = 100;
  std::string strategy = "gaussian";
  std::string scenario = "constant";
  int n = 100;
  std::string sampling;               // "age:count,age:count"
  std::vector<double> boundaries;     // custom scenario
  std::vector<double> values;         // custom scenario
  std::uint64_t seed = 1;
  long iterations = 1'000'000;
  long burn_in = 100'000;
  long thin = 100;
  double tau_alpha = 0.001;
  double tau_beta = 0.001;
  std::string format = "csv";
  bool natural_scale = false;
};

// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_infer(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_mcmc(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_compare(const RunConfig& config, std::ostream& out, std::ostream& err);

// 17 significant digits; parses back to the same double.
std::string format_number(double value);

}  // namespace coalinla::cli
