#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "speclab/harness.hpp"

using namespace speclab;

namespace {

const std::filesystem::path kConfigDir = SPECLAB_CONFIG_DIR;

Json base_config() {
  return Json::parse(R"({
    "model": {"seed": 3, "vocab_size": 8, "context_order": 1, "agreement": 0.9},
    "decode": {"mode": "sampling", "max_new_tokens": 40, "prompt_length": 2, "trials": 3, "base_seed": 5},
    "gamma_list": [0, 1, 4],
    "device": {"name": "dev", "t_draft_step": 0.001, "t_target_step": 0.01, "t_verify_per_token": 0.0001,
               "power_watts": 50.0}
  })");
}

std::string error_path(const Json& j) {
  try {
    experiment_config_from_json(j);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST(ExperimentConfig, ParsesInlineDevice) {
  const ExperimentConfig c = experiment_config_from_json(base_config());
  EXPECT_EQ(c.model.vocab_size, 8u);
  EXPECT_EQ(c.decode.mode, DecodeMode::kSampling);
  EXPECT_EQ(c.gamma_list, (std::vector<std::size_t>{0, 1, 4}));
  EXPECT_EQ(c.device.name, "dev");
  EXPECT_FALSE(c.pipeline.has_value());
}

TEST(ExperimentConfig, ErrorsNameTheOffendingField) {
  Json j = base_config();
  j["model"]["agreement"] = 1.5;
  EXPECT_EQ(error_path(j), "model.agreement");

  j = base_config();
  j["decode"]["mode"] = "beam";
  EXPECT_EQ(error_path(j), "decode.mode");

  j = base_config();
  j["gamma_list"] = Json::array({1, -2});
  EXPECT_EQ(error_path(j), "gamma_list[1]");

  j = base_config();
  j["gamma_list"] = Json::array();
  EXPECT_EQ(error_path(j), "gamma_list");

  j = base_config();
  j["device"] = "no-such-device";
  EXPECT_EQ(error_path(j), "device");

  j = base_config();
  j["device"]["t_target_step"] = -1.0;
  EXPECT_EQ(error_path(j).rfind("device", 0), 0u);

  j = base_config();
  j["decode"].erase("trials");
  EXPECT_EQ(error_path(j), "decode.trials");

  j = base_config();
  j["decode"]["prompt_length"] = 0;
  EXPECT_EQ(error_path(j), "decode.prompt_length");
}

TEST(ExperimentConfig, DeviceByNameUsesBuiltins) {
  Json j = base_config();
  j["device"] = "a100";
  EXPECT_EQ(experiment_config_from_json(j).device.name, "a100");
}

TEST(ExperimentConfig, ShippedConfigsLoad) {
  for (const char* name : {"sweep_high_agreement.json", "sweep_low_agreement.json", "sweep_a100.json"}) {
    EXPECT_NO_THROW(load_experiment_config(kConfigDir / name)) << name;
  }
  const auto c = load_experiment_config(kConfigDir / "sweep_high_agreement.json");
  ASSERT_TRUE(c.pipeline.has_value());
  EXPECT_EQ(c.pipeline->vocab_size, 50257u);
}

TEST(ExperimentConfig, MissingFileIsIoError) {
  EXPECT_THROW(load_experiment_config(kConfigDir / "does_not_exist.json"), IoError);
}

TEST(RunSweep, GammaZeroOnlyGivesUnitSpeedup) {
  Json j = base_config();
  j["gamma_list"] = Json::array({0});
  const SweepReport r = run_sweep(experiment_config_from_json(j));
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].speedup, 1.0);
  EXPECT_FALSE(r.rows[0].tar.has_value());
  EXPECT_GT(r.rows[0].tokens_per_sec, 0.0);
}

TEST(RunSweep, FullAgreementWithFreeVerifyMatchesIdeal) {
  Json j = base_config();
  j["model"]["agreement"] = 1.0;
  j["device"]["t_verify_per_token"] = 0.0;
  j["gamma_list"] = Json::array({0, 1, 2, 3, 7});
  const ExperimentConfig c = experiment_config_from_json(j);
  for (const auto& row : run_sweep(c).rows) {
    EXPECT_NEAR(row.speedup, ideal_speedup(row.gamma, c.device.t_draft_step, c.device.t_target_step), 1e-9)
        << "gamma " << row.gamma;
    if (row.gamma > 0) {
      EXPECT_EQ(*row.tar, 1.0);
    }
  }
}

TEST(RunSweep, ShippedHighAgreementBeatsBaseline) {
  const SweepReport r = run_sweep(load_experiment_config(kConfigDir / "sweep_high_agreement.json"));
  for (const auto& row : r.rows) {
    if (row.gamma > 0) {
      EXPECT_GT(row.speedup, 1.0) << "gamma " << row.gamma;
    }
  }
}

TEST(RunSweep, ShippedLowAgreementLosesAtLongDrafts) {
  const SweepReport r = run_sweep(load_experiment_config(kConfigDir / "sweep_low_agreement.json"));
  ASSERT_EQ(r.rows.back().gamma, 16u);
  EXPECT_LT(r.rows.back().speedup, 1.0);
}

TEST(RunSweep, DeterministicAndSeedSensitive) {
  const ExperimentConfig c = experiment_config_from_json(base_config());
  EXPECT_EQ(render_json(run_sweep(c)), render_json(run_sweep(c)));
  ExperimentConfig other = c;
  other.decode.base_seed += 1;
  EXPECT_NE(config_hash(other), config_hash(c));
  EXPECT_NE(run_sweep(other).rows[1].tokens_per_sec, run_sweep(c).rows[1].tokens_per_sec);
}

TEST(SweepReport, JsonRoundTrip) {
  const SweepReport r = run_sweep(experiment_config_from_json(base_config()));
  EXPECT_EQ(sweep_report_from_json(Json::parse(render_json(r))), r);
  const auto path = std::filesystem::temp_directory_path() / "speclab_roundtrip.json";
  emit_report(r, "json", path);
  EXPECT_EQ(load_report(path), r);
  std::filesystem::remove(path);
}

TEST(SweepReport, CsvLayout) {
  SweepReport r;
  r.rows = {{0, 41.5, std::nullopt, 1.0}, {4, 83.0, 0.875, 2.0}};
  EXPECT_EQ(render_csv(r), "gamma,tokens_per_sec,tar,speedup\n0,41.500,,1.00\n4,83.000,0.8750,2.00\n");
}

TEST(SweepReport, UnknownFormatIsUsageError) {
  EXPECT_THROW(parse_report_format("xml"), UsageError);
  EXPECT_THROW(emit_report(SweepReport{}, "yaml", "unused.out"), UsageError);
}

TEST(SweepReport, UnwritablePathIsIoError) {
  EXPECT_THROW(emit_report(SweepReport{}, ReportFormat::kCsv, "/nonexistent-dir/x/report.csv"), IoError);
}

TEST(SweepReport, FileMatchesStringRender) {
  const SweepReport r = run_sweep(experiment_config_from_json(base_config()));
  const auto path = std::filesystem::temp_directory_path() / "speclab_render.csv";
  emit_report(r, ReportFormat::kCsv, path);
  EXPECT_EQ(slurp(path), render_csv(r));
  std::filesystem::remove(path);
}

TEST(CompareDevices, ShippedProfileRatios) {
  const auto rep = compare_devices(builtin_device_profiles(), default_pipeline_config(), kCalibrationGamma);
  EXPECT_NEAR(rep.ratio("hades", "a100").rate_ratio, 6.99, 0.01);
  EXPECT_NEAR(rep.ratio("hades", "a6000").rate_ratio, 7.74, 0.01);
  EXPECT_NEAR(rep.ratio("hades", "a100").efficiency_ratio, 117.95, 0.01);
  EXPECT_NEAR(rep.ratio("hades", "a6000").efficiency_ratio, 159.66, 0.01);
  EXPECT_TRUE(rep.sram.fits);
  const std::size_t n = rep.devices.size();
  EXPECT_EQ(rep.ratios.size(), n * (n - 1));
}

TEST(CompareDevices, ShippedProfileFileMatchesBuiltins) {
  const auto from_file = device_profiles_from_json(read_json_file(kConfigDir / "profiles.json"));
  const auto builtin = builtin_device_profiles();
  ASSERT_EQ(from_file.size(), builtin.size());
  for (std::size_t i = 0; i < builtin.size(); ++i) EXPECT_EQ(from_file[i], builtin[i]);
}

TEST(CompareDevices, IdenticalProfilesGiveUnitRatios) {
  const DeviceProfile p{"x", 1e-3, 1e-2, 5e-8, 100.0};
  DeviceProfile q = p;
  q.name = "y";
  const auto rep = compare_devices({p, q}, default_pipeline_config(), 4);
  for (const auto& r : rep.ratios) {
    EXPECT_DOUBLE_EQ(r.rate_ratio, 1.0);
    EXPECT_DOUBLE_EQ(r.efficiency_ratio, 1.0);
  }
}

TEST(CompareDevices, Errors) {
  const DeviceProfile p{"x", 1e-3, 1e-2, 5e-8, 100.0};
  EXPECT_THROW(compare_devices({p}, default_pipeline_config(), 4), ConfigError);
  DeviceProfile free_verify{"y", 1e-3, 1e-2, 0.0, 100.0};
  EXPECT_THROW(compare_devices({p, free_verify}, default_pipeline_config(), 4), ConfigError);
  EXPECT_THROW(compare_devices({p, p}, default_pipeline_config(), 0), ConfigError);
}

TEST(MakePrompt, DeterministicAndInVocab) {
  const TokenSeq a = make_prompt(32, 5, 9);
  EXPECT_EQ(a, make_prompt(32, 5, 9));
  EXPECT_NE(a, make_prompt(32, 5, 10));
  for (TokenId t : a) EXPECT_LT(index_of(t), 5u);
}
