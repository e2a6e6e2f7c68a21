#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <pthread.h>

#include <CLI11.hpp>

#include "safeteleop/harness.hpp"
#include "safeteleop/scenario_io.hpp"
#include "safeteleop/teleop_server.hpp"

using namespace safeteleop;

namespace {

constexpr int kAbort = 2;

bool parse_switch(const std::string& s) { return s == "on"; }

void apply_seed(Scenario& s, std::optional<std::uint64_t> seed) {
  if (!seed) return;
  s.seed = *seed;
  s.model_seed = *seed;
}

void print_summary(const TrialSummary& s) {
  std::cout << "d=" << s.distance << " N_c=" << s.unsafe_steps << " h_min=" << s.h_min
            << " mean_correction=" << s.mean_correction << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perceptive CBF safety filter for a simulated teleoperated MAV"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string filter_mode = "on";
  std::optional<std::uint64_t> seed;
  std::string out_path;
  std::string grid_out;

  auto* run = app.add_subcommand("run", "Run a scripted scenario and write the per-step log");
  run->add_option("--scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--filter", filter_mode, "Safety filter on|off")->check(CLI::IsMember({"on", "off"}));
  run->add_option("--seed", seed, "Override scenario seeds");
  run->add_option("--out", out_path, "Per-step CSV output");
  run->add_option("--grid-out", grid_out, "Binary dump of the final occupancy grid");

  std::string axis = "z";
  double coord = 1.0;
  std::int64_t slice_steps = 0;
  auto* slice_cmd = app.add_subcommand("slice", "Export a TESDF slice after warm-up (and optional flight)");
  slice_cmd->add_option("--scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  slice_cmd->add_option("--axis", axis, "Slice normal x|y|z")->check(CLI::IsMember({"x", "y", "z"}));
  slice_cmd->add_option("--coord", coord, "Slice coordinate in meters");
  slice_cmd->add_option("--steps", slice_steps, "Scripted steps to fly before slicing");
  slice_cmd->add_option("--filter", filter_mode, "Safety filter on|off")->check(CLI::IsMember({"on", "off"}));
  slice_cmd->add_option("--seed", seed, "Override scenario seeds");
  slice_cmd->add_option("--out", out_path, "CSV output")->required();

  ServeOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Serve a live teleoperation session over websocket");
  serve->add_option("--scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", serve_opts.port, "TCP port");
  serve->add_option("--tick-hz", serve_opts.tick_hz, "Filter rate");
  serve->add_option("--slice-hz", serve_opts.slice_hz, "Map slice broadcast rate");
  serve->add_option("--seed", seed, "Override scenario seeds");

  CLI11_PARSE(app, argc, argv);

  try {
    Scenario scenario = load_scenario(scenario_path);
    apply_seed(scenario, seed);

    if (*run) {
      if (grid_out.empty()) {
        const TrialLog log = run_trial(scenario, parse_switch(filter_mode));
        if (!out_path.empty()) export_csv(log, out_path);
        print_summary(summarize(log, scenario.truncation));
      } else {
        TrialRunner runner(scenario);
        for (std::int64_t k = 0; k < scenario.steps; ++k) {
          const Reference ref = scripted_reference(scenario, k);
          runner.step(ref.position, ref.yaw, parse_switch(filter_mode));
        }
        if (!out_path.empty()) export_csv(runner.log(), out_path);
        std::ofstream os(grid_out, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open '" + grid_out + "'");
        write_grid(os, runner.grid().snapshot());
        print_summary(summarize(runner.log(), scenario.truncation));
      }
      return 0;
    }

    if (*slice_cmd) {
      TrialRunner runner(scenario);
      for (std::int64_t k = 0; k < slice_steps; ++k) {
        const Reference ref = scripted_reference(scenario, k);
        runner.step(ref.position, ref.yaw, parse_switch(filter_mode));
      }
      export_slice(runner.field(), parse_axis(axis), coord, out_path);
      return 0;
    }

    // Block termination signals in every thread; the main thread waits for them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    TeleopServer server(std::move(scenario), serve_opts);
    server.start();
    std::cout << "serving on port " << server.port() << " (ws://localhost:" << server.port() << "/ws)" << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
    print_summary(summarize(server.session_record(), load_scenario(scenario_path).truncation));
    return 0;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario aborted: " << e.what() << '\n';
    return kAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
