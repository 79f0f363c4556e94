#pragma once

// Experiment driver: gamma sweeps over simulated runtime, device
// comparisons of the verification phase, and report emission.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "speclab/errors.hpp"
#include "speclab/json_io.hpp"
#include "speclab/metrics.hpp"
#include "speclab/model_zoo.hpp"
#include "speclab/pipeline.hpp"
#include "speclab/rng.hpp"
#include "speclab/specdec.hpp"

namespace speclab {

// --- shipped configurations ---------------------------------------------------

/// Name of the device whose verification rate comes from the pipeline model
/// rather than from t_verify_per_token.
inline constexpr const char* kPipelineDevice = "hades";

/// Draft length the shipped profiles are calibrated at.
inline constexpr std::size_t kCalibrationGamma = 4;

/// Illustrative defaults: 4 stages at 500 MHz, 2-byte logits over a 50257-token
/// vocabulary, 1 MiB of SRAM.
inline PipelineConfig default_pipeline_config() { return PipelineConfig{}; }

/// Illustrative device profiles, not measurements. Verify latencies and
/// power are set so that, against default_pipeline_config() at
/// kCalibrationGamma, the verify-unit ratios land on the reference fixtures
/// (rate 6.99x / 7.74x, efficiency 117.95x / 159.66x vs a100 / a6000).
inline std::vector<DeviceProfile> builtin_device_profiles() {
  return {
      {"a100", 0.004, 0.040, 2.4465e-8, 253.1115879828},
      {"a6000", 0.005, 0.050, 2.709e-8, 309.4186046512},
      {"i7-12700k", 0.050, 0.600, 2.6e-8, 125.0},
      {"hls-c", 0.004, 0.040, 1.2e-6, 4.0},
      {"hades", 0.004, 0.040, 3.5e-9, 15.0},
  };
}

inline bool is_pipeline_device(const DeviceProfile& d) {
  std::string n = d.name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  return n == kPipelineDevice;
}

// --- experiment config --------------------------------------------------------

struct DecodeSpec {
  DecodeMode mode = DecodeMode::kGreedy;
  std::size_t max_new_tokens = 256;
  std::size_t prompt_length = 8;
  std::size_t trials = 20;
  std::uint64_t base_seed = 0;
};

struct ExperimentConfig {
  ModelSpec model;
  DecodeSpec decode;
  std::vector<std::size_t> gamma_list;
  DeviceProfile device;
  std::optional<PipelineConfig> pipeline;

  void validate() const {
    if (gamma_list.empty()) throw ConfigError("gamma_list", "must not be empty");
    if (decode.trials < 1) throw ConfigError("decode.trials", "must be >= 1");
    if (decode.max_new_tokens < 1) throw ConfigError("decode.max_new_tokens", "must be >= 1");
    if (decode.prompt_length < model.context_order) {
      throw ConfigError("decode.prompt_length", "must be >= model.context_order");
    }
    if (model.vocab_size < 2) throw ConfigError("model.vocab_size", "must be >= 2");
    if (!(model.agreement >= 0.0 && model.agreement <= 1.0)) throw ConfigError("model.agreement", "must lie in [0, 1]");
    detail::validated("device", [&] { device.validate(); });
  }
};

inline Json to_json(const ExperimentConfig& c) {
  Json j{{"model", to_json(c.model)},
         {"decode",
          {{"mode", to_string(c.decode.mode)},
           {"max_new_tokens", c.decode.max_new_tokens},
           {"prompt_length", c.decode.prompt_length},
           {"trials", c.decode.trials},
           {"base_seed", c.decode.base_seed}}},
         {"gamma_list", c.gamma_list},
         {"device", to_json(c.device)}};
  if (c.pipeline) j["pipeline"] = to_json(*c.pipeline);
  return j;
}

inline DeviceProfile find_profile(const std::vector<DeviceProfile>& profiles, const std::string& name,
                                  const std::string& path) {
  for (const auto& p : profiles) {
    if (p.name == name) return p;
  }
  throw ConfigError(path, "no device profile named '" + name + "'");
}

/// Parses an experiment config. "device" is either an inline profile or a
/// profile name, looked up in the file named by "profiles" (relative to
/// `base_dir`) or else in the shipped set. "pipeline" is an inline object or
/// a path.
inline ExperimentConfig experiment_config_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ConfigError("", "experiment config must be a JSON object");
  ExperimentConfig c;
  c.model = model_spec_from_json(detail::require(j, "model", ""), "model");

  const Json& d = detail::require(j, "decode", "");
  try {
    c.decode.mode = parse_mode(detail::string_at(d, "mode", "decode"));
  } catch (const RangeError& e) {
    throw ConfigError("decode.mode", e.what());
  }
  c.decode.max_new_tokens = detail::count_at(d, "max_new_tokens", "decode");
  c.decode.prompt_length = detail::count_at(d, "prompt_length", "decode");
  c.decode.trials = detail::count_at(d, "trials", "decode");
  c.decode.base_seed = detail::count_at(d, "base_seed", "decode");

  const Json& g = detail::require(j, "gamma_list", "");
  if (!g.is_array()) throw ConfigError("gamma_list", "expected an array");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g[i].is_number_unsigned() && !(g[i].is_number_integer() && g[i].get<std::int64_t>() >= 0)) {
      throw ConfigError("gamma_list[" + std::to_string(i) + "]", "expected a non-negative integer");
    }
    c.gamma_list.push_back(g[i].get<std::size_t>());
  }

  const Json& dev = detail::require(j, "device", "");
  if (dev.is_object()) {
    c.device = device_profile_from_json(dev, "device");
  } else if (dev.is_string()) {
    std::vector<DeviceProfile> profiles = builtin_device_profiles();
    if (auto it = j.find("profiles"); it != j.end()) {
      if (!it->is_string()) throw ConfigError("profiles", "expected a path");
      profiles = device_profiles_from_json(read_json_file(base_dir / it->get<std::string>()), "profiles");
    }
    c.device = find_profile(profiles, dev.get<std::string>(), "device");
  } else {
    throw ConfigError("device", "expected a profile object or a profile name");
  }

  if (auto it = j.find("pipeline"); it != j.end()) {
    if (it->is_string()) {
      c.pipeline = pipeline_config_from_json(read_json_file(base_dir / it->get<std::string>()), "pipeline");
    } else {
      c.pipeline = pipeline_config_from_json(*it, "pipeline");
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from_json(read_json_file(path), path.parent_path());
}

/// FNV-1a over the canonical JSON dump; identifies a resolved config.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// --- sweep -----------------------------------------------------------------------

struct SweepRow {
  std::size_t gamma = 0;
  double tokens_per_sec = 0.0;
  std::optional<double> tar;
  double speedup = 1.0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string device;
  std::vector<SweepRow> rows;

  friend bool operator==(const SweepReport&, const SweepReport&) = default;
};

inline TokenSeq make_prompt(std::size_t length, std::size_t vocab_size, std::uint64_t seed) {
  UniformStream rng(seed, Stream::kPrompt);
  TokenSeq prompt(length);
  for (auto& t : prompt) {
    t = token(std::min(vocab_size - 1, static_cast<std::size_t>(rng.next() * static_cast<double>(vocab_size))));
  }
  return prompt;
}

/// Totals over every trial at one gamma. Tokens count everything the
/// iterations emitted, including the final overshoot, so throughput matches
/// the per-iteration cost model exactly.
struct GammaTotals {
  std::size_t tokens = 0;
  double seconds = 0.0;
  std::size_t accepted = 0;
  std::size_t drafted = 0;
};

inline GammaTotals run_trials(const ModelPair& pair, const ExperimentConfig& config, std::size_t gamma) {
  GammaTotals tot;
  for (std::size_t i = 0; i < config.decode.trials; ++i) {
    const std::uint64_t seed = config.decode.base_seed + i;
    const TokenSeq prompt = make_prompt(config.decode.prompt_length, config.model.vocab_size, seed);
    const SpecConfig spec{gamma, config.decode.max_new_tokens, config.decode.mode, seed};
    const DecodeResult res = speculative_decode(pair, prompt, spec);
    tot.seconds += simulate_runtime(res.trace, config.device, gamma);
    tot.tokens += res.trace.n_final - prompt.size();
    for (const auto& it : res.trace.iterations) {
      tot.accepted += it.accept_count;
      tot.drafted += it.drafted.size();
    }
  }
  return tot;
}

inline SweepReport run_sweep(const ExperimentConfig& config) {
  config.validate();
  const ModelPair pair = make_model_pair(config.model);

  SweepReport report;
  report.config_hash = config_hash(config);
  report.seed = config.decode.base_seed;
  report.device = config.device.name;

  auto throughput = [](const GammaTotals& t) { return static_cast<double>(t.tokens) / t.seconds; };
  const double baseline = throughput(run_trials(pair, config, 0));

  for (std::size_t gamma : config.gamma_list) {
    const GammaTotals tot = gamma == 0 ? GammaTotals{} : run_trials(pair, config, gamma);
    SweepRow row;
    row.gamma = gamma;
    if (gamma == 0) {
      row.tokens_per_sec = baseline;
      row.speedup = 1.0;
    } else {
      row.tokens_per_sec = throughput(tot);
      row.speedup = speedup_ratio(row.tokens_per_sec, baseline);
      if (tot.drafted > 0) row.tar = static_cast<double>(tot.accepted) / static_cast<double>(tot.drafted);
    }
    report.rows.push_back(row);
  }
  return report;
}

// --- report emission ----------------------------------------------------------------

enum class ReportFormat { kCsv, kJson };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "json") return ReportFormat::kJson;
  throw UsageError("unknown report format '" + s + "' (expected csv or json)");
}

inline Json to_json(const SweepReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json jr{{"gamma", row.gamma}, {"tokens_per_sec", row.tokens_per_sec}, {"tar", nullptr}, {"speedup", row.speedup}};
    if (row.tar) jr["tar"] = *row.tar;
    rows.push_back(std::move(jr));
  }
  return Json{{"metadata", {{"config_hash", r.config_hash}, {"seed", r.seed}, {"device", r.device}}},
              {"rows", std::move(rows)}};
}

inline SweepReport sweep_report_from_json(const Json& j) {
  SweepReport r;
  try {
    const Json& meta = j.at("metadata");
    r.config_hash = meta.at("config_hash").get<std::string>();
    r.seed = meta.at("seed").get<std::uint64_t>();
    r.device = meta.at("device").get<std::string>();
    for (const auto& jr : j.at("rows")) {
      SweepRow row;
      row.gamma = jr.at("gamma").get<std::size_t>();
      row.tokens_per_sec = jr.at("tokens_per_sec").get<double>();
      if (!jr.at("tar").is_null()) row.tar = jr.at("tar").get<double>();
      row.speedup = jr.at("speedup").get<double>();
      r.rows.push_back(row);
    }
  } catch (const Json::exception& e) {
    throw ConfigError("report", e.what());
  }
  return r;
}

inline std::string render_json(const SweepReport& r) { return to_json(r).dump(2) + "\n"; }

/// Columns: gamma,tokens_per_sec,tar,speedup. tar is blank when undefined.
inline std::string render_csv(const SweepReport& r) {
  std::ostringstream os;
  os << "gamma,tokens_per_sec,tar,speedup\n";
  for (const auto& row : r.rows) {
    os << row.gamma << ',' << render_fixed(row.tokens_per_sec, 3) << ',';
    if (row.tar) os << render_fixed(*row.tar, 4);
    os << ',' << render_fixed(row.speedup, 2) << '\n';
  }
  return os.str();
}

inline void emit_report(const SweepReport& report, ReportFormat format, const std::filesystem::path& path) {
  write_text_file(path, format == ReportFormat::kCsv ? render_csv(report) : render_json(report));
}

inline void emit_report(const SweepReport& report, const std::string& format, const std::filesystem::path& path) {
  emit_report(report, parse_report_format(format), path);
}

inline SweepReport load_report(const std::filesystem::path& path) { return sweep_report_from_json(read_json_file(path)); }

// --- device comparison ------------------------------------------------------------

struct DeviceResult {
  std::string name;
  bool pipeline_modeled = false;
  double verify_tokens_per_sec = 0.0;
  double tokens_per_sec_per_watt = 0.0;
};

struct DeviceRatio {
  std::string numerator;
  std::string denominator;
  double rate_ratio = 0.0;
  double efficiency_ratio = 0.0;
};

struct DeviceReport {
  std::size_t gamma = 0;
  PipelineConfig pipeline;
  SramFit sram;
  std::vector<DeviceResult> devices;
  std::vector<DeviceRatio> ratios;  // every ordered pair of distinct devices

  const DeviceRatio& ratio(const std::string& num, const std::string& den) const {
    for (const auto& r : ratios) {
      if (r.numerator == num && r.denominator == den) return r;
    }
    throw RangeError("no ratio " + num + "/" + den);
  }
};

/// Verification throughput per device. Cost-model devices verify gamma + 1
/// positions in (gamma + 1) t_verify_per_token; the pipeline device uses
/// verified_tokens_per_sec.
inline DeviceReport compare_devices(const std::vector<DeviceProfile>& profiles, const PipelineConfig& pipeline,
                                    std::size_t gamma) {
  if (profiles.size() < 2) throw ConfigError("profiles", "need at least two device profiles");
  if (gamma < 1) throw ConfigError("gamma", "must be >= 1");
  detail::validated("pipeline", [&] { pipeline.validate(); });

  DeviceReport rep;
  rep.gamma = gamma;
  rep.pipeline = pipeline;
  rep.sram = check_sram_fit(gamma, pipeline);

  const double g1 = static_cast<double>(gamma + 1);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const DeviceProfile& p = profiles[i];
    detail::validated("profiles[" + std::to_string(i) + "]", [&] { p.validate(); });
    DeviceResult d;
    d.name = p.name;
    d.pipeline_modeled = is_pipeline_device(p);
    if (d.pipeline_modeled) {
      d.verify_tokens_per_sec = verified_tokens_per_sec(pipeline, gamma);
    } else {
      if (!(p.t_verify_per_token > 0.0)) {
        throw ConfigError("profiles[" + std::to_string(i) + "].t_verify_per_token", "must be > 0 to compare");
      }
      d.verify_tokens_per_sec = g1 / (g1 * p.t_verify_per_token);
    }
    d.tokens_per_sec_per_watt = tokens_per_sec_per_watt(d.verify_tokens_per_sec, 1.0, p.power_watts);
    rep.devices.push_back(d);
  }
  for (const auto& a : rep.devices) {
    for (const auto& b : rep.devices) {
      if (&a == &b) continue;
      rep.ratios.push_back({a.name, b.name, a.verify_tokens_per_sec / b.verify_tokens_per_sec,
                            a.tokens_per_sec_per_watt / b.tokens_per_sec_per_watt});
    }
  }
  return rep;
}

inline Json to_json(const DeviceReport& r) {
  Json devices = Json::array();
  for (const auto& d : r.devices) {
    devices.push_back({{"name", d.name},
                       {"source", d.pipeline_modeled ? "pipeline" : "cost-model"},
                       {"verify_tokens_per_sec", d.verify_tokens_per_sec},
                       {"tokens_per_sec_per_watt", d.tokens_per_sec_per_watt}});
  }
  Json ratios = Json::array();
  for (const auto& x : r.ratios) {
    ratios.push_back({{"numerator", x.numerator},
                      {"denominator", x.denominator},
                      {"rate_ratio", x.rate_ratio},
                      {"efficiency_ratio", x.efficiency_ratio}});
  }
  return Json{{"gamma", r.gamma},
              {"pipeline", to_json(r.pipeline)},
              {"sram", {{"fits", r.sram.fits}, {"required_bytes", r.sram.required_bytes},
                        {"capacity_bytes", r.sram.capacity_bytes}, {"deficit_bytes", r.sram.deficit_bytes}}},
              {"devices", std::move(devices)},
              {"ratios", std::move(ratios)}};
}

inline std::string render_text(const DeviceReport& r) {
  std::ostringstream os;
  os << "gamma=" << r.gamma << "  logit buffer " << r.sram.required_bytes << " B / SRAM " << r.sram.capacity_bytes
     << " B (" << (r.sram.fits ? "fits" : "overflow by " + std::to_string(r.sram.deficit_bytes) + " B") << ")\n";
  os << std::left << std::setw(12) << "device" << std::setw(12) << "source" << std::right << std::setw(16)
     << "verify tok/s" << std::setw(16) << "tok/s/W" << '\n';
  for (const auto& d : r.devices) {
    os << std::left << std::setw(12) << d.name << std::setw(12) << (d.pipeline_modeled ? "pipeline" : "cost-model")
       << std::right << std::setw(16) << std::setprecision(6) << d.verify_tokens_per_sec << std::setw(16)
       << d.tokens_per_sec_per_watt << '\n';
  }
  os << "\nratios (rate, efficiency):\n";
  for (const auto& x : r.ratios) {
    os << "  " << x.numerator << "/" << x.denominator << ": " << render_fixed(x.rate_ratio) << "x, "
       << render_fixed(x.efficiency_ratio) << "x\n";
  }
  return os.str();
}

}  // namespace speclab
