// Command-line front end: run experiments, check envelope gradients, print
// theory schedules and compute fairness metrics.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smag/harness.hpp"

namespace {

using smag::harness::ConfigError;
using smag::harness::Json;

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kRuntime = 3;

Json load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  for (const auto& o : overrides) smag::harness::apply_override(j, o);
  return j;
}

int cmd_run(const std::string& path, const std::vector<std::string>& overrides) {
  const Json cfg = load_config(path, overrides);
  const auto out = smag::harness::run_experiment(cfg, smag::harness::output_root_from_env(), std::cerr);
  if (out.exit_code == kInvalid) return kInvalid;
  for (const auto& s : out.seeds) std::cout << "trace   " << s.trace_path.string() << "\n";
  std::cout << "summary " << out.summary_path.string() << "\n";
  std::cout << "config_hash " << out.config_hash << "\n";
  if (out.exit_code != kOk) std::cerr << out.message << "\n";
  return out.exit_code;
}

int cmd_grad_check(const std::string& path, const std::vector<std::string>& overrides) {
  const Json cfg = load_config(path, overrides);
  const auto rep = smag::harness::grad_check(cfg);
  Json j{{"max_rel_err", rep.max_rel_err}, {"points", rep.points}, {"rejected", rep.rejected},
         {"gamma", rep.gamma}, {"h", rep.h}};
  std::cout << "max relative error " << rep.max_rel_err << " over " << rep.points << " points (" << rep.rejected
            << " rejected near kinks)\n"
            << j.dump() << "\n";
  return kOk;
}

int cmd_schedule(const std::string& path, const std::vector<std::string>& overrides) {
  const Json cfg = load_config(path, overrides);
  const auto rep = smag::harness::print_schedule(cfg);
  std::cout << rep.text << rep.machine.dump() << "\n";
  return kOk;
}

int cmd_fairness(const std::string& path, double threshold, double rho) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<double> scores;
  std::vector<int> labels, attrs;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "score,label,attr") throw ConfigError("expected header 'score,label,attr'");
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected three fields");
    }
    try {
      scores.push_back(std::stod(a));
      labels.push_back(std::stoi(b));
      attrs.push_back(std::stoi(c));
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(lineno) + ": bad number");
    }
  }
  const auto r = smag::harness::fairness_metrics(scores, labels, attrs, threshold, rho);
  Json j{{"eod", r.eod}, {"eop", r.eop}, {"dp", r.dp}, {"pauc", r.pauc}};
  std::cout << "EOD  " << r.eod << "\nEOP  " << r.eop << "\nDP   " << r.dp << "\npAUC " << r.pauc << "\n"
            << j.dump() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Moreau-envelope optimizer: experiments and verification tools"};
  app.require_subcommand(1);
  std::vector<std::string> overrides;

  std::string run_cfg;
  auto* run = app.add_subcommand("run", "Run an experiment config over all its seeds");
  run->add_option("config", run_cfg, "Experiment JSON")->required();
  run->add_option("--set", overrides, "Override a config entry, e.g. --set schedule.eta0=0.01");

  std::string gc_cfg;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of the envelope-difference gradient");
  gc->add_option("config", gc_cfg, "grad-check JSON")->required();
  gc->add_option("--set", overrides, "Override a config entry");

  std::string sc_cfg;
  auto* sc = app.add_subcommand("schedule", "Print the theory schedule and its intermediates");
  sc->add_option("config", sc_cfg, "schedule JSON")->required();
  sc->add_option("--set", overrides, "Override a config entry");

  std::string scores_path;
  double threshold = 0.0, rho = 0.3;
  auto* fm = app.add_subcommand("fairness", "Fairness gaps and partial AUC of a score file");
  fm->add_option("scores", scores_path, "CSV with header score,label,attr")->required();
  fm->add_option("--threshold", threshold, "Decision threshold on the score");
  fm->add_option("--rho", rho, "FPR upper bound for partial AUC");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) return cmd_run(run_cfg, overrides);
    if (*gc) return cmd_grad_check(gc_cfg, overrides);
    if (*sc) return cmd_schedule(sc_cfg, overrides);
    if (*fm) return cmd_fairness(scores_path, threshold, rho);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const smag::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const smag::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
