// speclab: experiment driver for speculative decoding sweeps, device
// comparisons and invariant checks.
//
// Exit codes: 0 success, 1 invariant failure, 2 config/usage error, 3 I/O error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "speclab/speclab.hpp"

namespace {

enum ExitCode : int { kOk = 0, kInvariantFailure = 1, kConfigError = 2, kIoError = 3 };

int run_sweep_cmd(const std::string& config_path, const std::string& out, const std::string& format,
                  std::optional<std::uint64_t> seed) {
  speclab::ExperimentConfig cfg = speclab::load_experiment_config(config_path);
  if (seed) cfg.decode.base_seed = *seed;
  const auto fmt = speclab::parse_report_format(format);
  const speclab::SweepReport report = speclab::run_sweep(cfg);
  if (out.empty() || out == "-") {
    std::cout << (fmt == speclab::ReportFormat::kCsv ? speclab::render_csv(report) : speclab::render_json(report));
  } else {
    speclab::emit_report(report, fmt, out);
  }
  return kOk;
}

int run_compare_cmd(const std::string& profiles_path, const std::string& pipeline_path, std::size_t gamma,
                    bool json) {
  const auto profiles = profiles_path.empty()
                            ? speclab::builtin_device_profiles()
                            : speclab::device_profiles_from_json(speclab::read_json_file(profiles_path));
  const auto pipeline = pipeline_path.empty() ? speclab::default_pipeline_config()
                                              : speclab::pipeline_config_from_json(speclab::read_json_file(pipeline_path));
  const auto report = speclab::compare_devices(profiles, pipeline, gamma);
  if (json) {
    std::cout << speclab::to_json(report).dump(2) << '\n';
  } else {
    std::cout << speclab::render_text(report);
  }
  return kOk;
}

int run_amdahl_cmd(const std::vector<double>& fractions, double speedup) {
  for (double f : fractions) {
    std::cout << "verify fraction " << f << ", verify speedup " << speedup
              << " -> end-to-end " << speclab::render_fixed(speclab::amdahl_end_to_end(f, speedup), 4) << "x\n";
  }
  return kOk;
}

int run_verify_cmd(std::optional<std::uint64_t> seed, const std::string& mutation) {
  speclab::VerifySuiteOptions opt;
  if (seed) opt.seed = *seed;
  if (mutation == "skip-residual-normalization") {
    opt.residual = speclab::unnormalized_residual;
  } else if (!mutation.empty()) {
    throw speclab::UsageError("unknown mutation '" + mutation + "'");
  }
  const auto summary = speclab::verify_suite(opt);
  for (const auto& c : summary.checks) {
    std::cout << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << '\n';
  }
  if (const auto* f = summary.first_failure()) {
    std::cerr << "first counterexample (" << f->name << "): " << f->detail << '\n';
    return kInvariantFailure;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speculative decoding lab: gamma sweeps, device comparison, invariant checks"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Override the base seed (sweep) or suite seed (verify)");

  auto* sweep = app.add_subcommand("sweep", "Run a gamma sweep and write a report");
  std::string config_path, out_path, format = "json";
  sweep->add_option("--config", config_path, "Experiment config JSON")->required();
  sweep->add_option("--out", out_path, "Output path ('-' or omitted for stdout)");
  sweep->add_option("--format", format, "csv or json");

  auto* compare = app.add_subcommand("compare", "Compare verification throughput across devices");
  std::string profiles_path, pipeline_path;
  std::size_t gamma = speclab::kCalibrationGamma;
  bool compare_json = false;
  compare->add_option("--profiles", profiles_path, "Device profile JSON array (default: shipped profiles)");
  compare->add_option("--pipeline", pipeline_path, "Pipeline config JSON (default: shipped config)");
  compare->add_option("--gamma", gamma, "Draft length");
  compare->add_flag("--json", compare_json, "Print the report as JSON");

  auto* amdahl = app.add_subcommand("amdahl", "End-to-end speedup when only verification is accelerated");
  std::vector<double> fractions{speclab::fixtures::kVerifyFractionLow, speclab::fixtures::kVerifyFractionHigh};
  double verify_speedup = speclab::fixtures::kRateVsA100;
  amdahl->add_option("--fraction", fractions, "Verification share of end-to-end runtime, in (0, 1)");
  amdahl->add_option("--speedup", verify_speedup, "Speedup of the verification phase");

  auto* verify = app.add_subcommand("verify", "Run the equivalence and golden-model invariant suites");
  std::string mutation;
  verify->add_option("--mutate", mutation, "Inject a known bug to check the suite catches it")
      ->check(CLI::IsMember({"skip-residual-normalization"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*sweep) return run_sweep_cmd(config_path, out_path, format, seed);
    if (*compare) return run_compare_cmd(profiles_path, pipeline_path, gamma, compare_json);
    if (*amdahl) return run_amdahl_cmd(fractions, verify_speedup);
    if (*verify) return run_verify_cmd(seed, mutation);
  } catch (const speclab::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const speclab::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}
