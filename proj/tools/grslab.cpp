// Command-line front end: verify / spectrum / stability runs over closed
// model manifolds, configured by a flat key=value file with command-line
// overrides.  Exit codes: 0 all checks pass, 1 at least one check failed,
// 2 configuration error, 3 numerical-construction error.

#include <cstdio>
#include <exception>
#include <iostream>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "grslab/config.hpp"
#include "grslab/errors.hpp"
#include "grslab/report.hpp"
#include "grslab/run.hpp"

namespace {

int execute(const std::string& command, const grs::CliOverrides& cli) {
  const grs::RunConfig cfg = grs::load_config(cli);

  grs::RunOutput out;
  if (command == "verify")
    out = grs::run_verify(cfg);
  else if (command == "spectrum")
    out = grs::run_spectrum(cfg);
  else
    out = grs::run_stability(cfg);

  if (cfg.out_json.empty()) {
    std::fwrite(out.json.data(), 1, out.json.size(), stdout);
    std::fflush(stdout);
  } else {
    try {
      grs::write_text_file(cfg.out_json, out.json);
    } catch (const std::runtime_error& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 2;
    }
  }

  if (!out.csv.empty() && !out.csv_path.empty()) {
    try {
      grs::write_text_file(out.csv_path, out.csv);
    } catch (const std::runtime_error& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 2;
    }
  }
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for weighted geometry on closed model manifolds"};
  app.require_subcommand(1);

  grs::CliOverrides cli;
  auto add_common = [&cli](CLI::App* sub) {
    sub->add_option("--config", cli.config_path, "flat key=value configuration file");
    sub->add_option("--model", cli.model_spec,
                    "model spec: s2 | s3 | s4 | s2xs2 | ellipsoid | sphere:n=2,r=1.5 | "
                    "product:n1=2,r1=1,n2=2,r2=1 | generic:ellipsoid");
    sub->add_option("--res", cli.res, "per-axis grid resolution(s), e.g. 12x24 or 12x24,24x48");
    sub->add_option("--L", cli.L, "polynomial truncation degree (0..4)");
    sub->add_option("--seed", cli.seed, "seed for generated test fields");
    sub->add_option("--out", cli.out, "JSON report path (the CSV table derives its name from it)");
  };

  add_common(app.add_subcommand(
      "verify", "run the identity suites and quadrature checks on a model"));
  add_common(app.add_subcommand(
      "spectrum", "compute weighted operator spectra with residuals and a CSV table"));
  add_common(app.add_subcommand(
      "stability", "run the linear-stability analysis on an exact shrinker model"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return execute(command, cli);
  } catch (const grs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const grs::BuildError& e) {
    std::cerr << "build error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
