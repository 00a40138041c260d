#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "trimsim/trimsim.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Packet-level simulator of switch packet trimming"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::string axis;
  std::string dir_a;
  std::string dir_b;
  unsigned jobs = 0;

  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Run one scenario per axis value");
  sweep->add_option("--axis", axis, "n_senders, response_duration or variant")
      ->required()
      ->check(CLI::IsMember({"n_senders", "response_duration", "variant"}));
  sweep->add_option("--config", config, "Base scenario JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "Output directory")->required();
  sweep->add_option("--jobs", jobs, "Worker threads (default: hardware concurrency)");

  auto* compare = app.add_subcommand("compare", "Compare the counters of two run directories");
  compare->add_option("--a", dir_a, "First run directory")->required()->check(CLI::ExistingDirectory);
  compare->add_option("--b", dir_b, "Baseline run directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto rc = trimsim::load_config(config);
      const auto m = trimsim::run_scenario(rc.scenario);
      trimsim::write_run(out, rc.scenario, m);
      std::cout << rc.scenario.name << ": trims=" << m.trims() << " signals=" << m.counters.signals
                << " max_dod_queue=" << m.counters.max_dod() << " goodput_mean_gbps=" << m.mean_goodput_gbps()
                << '\n';
    } else if (*sweep) {
      const auto rc = trimsim::load_config(config);
      const auto a = trimsim::parse_sweep_axis(axis);
      const auto values = rc.sweep_values.empty() ? trimsim::default_sweep_values(a) : rc.sweep_values;
      const auto rows = trimsim::sweep(a, rc.scenario, values,
                                       jobs == 0 ? std::thread::hardware_concurrency() : jobs);
      trimsim::write_sweep_dir(out, rc.scenario, rows);
      std::cout << rows.size() << " points written to " << out << "/sweep.csv\n";
    } else if (*compare) {
      trimsim::compare_runs(std::cout, dir_a, dir_b);
    }
  } catch (const trimsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
