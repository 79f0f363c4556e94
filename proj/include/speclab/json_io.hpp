#pragma once

// JSON encodings of the model spec, device profiles, pipeline config and
// decode traces. Field names are the wire schema.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "speclab/errors.hpp"
#include "speclab/metrics.hpp"
#include "speclab/model_zoo.hpp"
#include "speclab/pipeline.hpp"
#include "speclab/specdec.hpp"

namespace speclab {

using Json = nlohmann::json;

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline const Json& require(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join_path(path, key), "missing field");
  return *it;
}

inline double number_at(const Json& obj, const std::string& key, const std::string& path) {
  const Json& v = require(obj, key, path);
  if (!v.is_number()) throw ConfigError(join_path(path, key), "expected a number");
  return v.get<double>();
}

inline std::uint64_t count_at(const Json& obj, const std::string& key, const std::string& path) {
  const Json& v = require(obj, key, path);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(join_path(path, key), "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::string string_at(const Json& obj, const std::string& key, const std::string& path) {
  const Json& v = require(obj, key, path);
  if (!v.is_string()) throw ConfigError(join_path(path, key), "expected a string");
  return v.get<std::string>();
}

// Re-raise library validation failures as config errors at `path`.
template <class F>
void validated(const std::string& path, F&& check) {
  try {
    check();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace detail

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

// --- model spec -------------------------------------------------------------

inline Json to_json(const ModelSpec& m) {
  return Json{{"seed", m.seed}, {"vocab_size", m.vocab_size}, {"context_order", m.context_order},
              {"agreement", m.agreement}};
}

inline ModelSpec model_spec_from_json(const Json& j, const std::string& path = "model") {
  ModelSpec m;
  m.seed = detail::count_at(j, "seed", path);
  m.vocab_size = detail::count_at(j, "vocab_size", path);
  m.context_order = detail::count_at(j, "context_order", path);
  m.agreement = detail::number_at(j, "agreement", path);
  if (m.vocab_size < 2) throw ConfigError(path + ".vocab_size", "must be >= 2");
  if (!(m.agreement >= 0.0 && m.agreement <= 1.0)) throw ConfigError(path + ".agreement", "must lie in [0, 1]");
  return m;
}

// --- device profiles --------------------------------------------------------

inline Json to_json(const DeviceProfile& d) {
  return Json{{"name", d.name},
              {"t_draft_step", d.t_draft_step},
              {"t_target_step", d.t_target_step},
              {"t_verify_per_token", d.t_verify_per_token},
              {"power_watts", d.power_watts}};
}

inline DeviceProfile device_profile_from_json(const Json& j, const std::string& path) {
  DeviceProfile d;
  d.name = detail::string_at(j, "name", path);
  d.t_draft_step = detail::number_at(j, "t_draft_step", path);
  d.t_target_step = detail::number_at(j, "t_target_step", path);
  d.t_verify_per_token = detail::number_at(j, "t_verify_per_token", path);
  d.power_watts = detail::number_at(j, "power_watts", path);
  detail::validated(path, [&] { d.validate(); });
  return d;
}

inline std::vector<DeviceProfile> device_profiles_from_json(const Json& j, const std::string& path = "profiles") {
  if (!j.is_array()) throw ConfigError(path, "expected an array of device profiles");
  std::vector<DeviceProfile> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(device_profile_from_json(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

// --- pipeline ----------------------------------------------------------------

inline Json to_json(const PipelineConfig& c) {
  return Json{{"pipeline_depth", c.pipeline_depth},
              {"clock_hz", c.clock_hz},
              {"sram_capacity_bytes", c.sram_capacity_bytes},
              {"bytes_per_logit", c.bytes_per_logit},
              {"vocab_size", c.vocab_size}};
}

inline PipelineConfig pipeline_config_from_json(const Json& j, const std::string& path = "pipeline") {
  PipelineConfig c;
  c.pipeline_depth = detail::count_at(j, "pipeline_depth", path);
  c.clock_hz = detail::number_at(j, "clock_hz", path);
  c.sram_capacity_bytes = detail::count_at(j, "sram_capacity_bytes", path);
  c.bytes_per_logit = detail::count_at(j, "bytes_per_logit", path);
  c.vocab_size = detail::count_at(j, "vocab_size", path);
  detail::validated(path, [&] { c.validate(); });
  return c;
}

// --- traces ----------------------------------------------------------------

inline Json tokens_to_json(const TokenSeq& seq) {
  Json arr = Json::array();
  for (TokenId t : seq) arr.push_back(index_of(t));
  return arr;
}

inline TokenSeq tokens_from_json(const Json& arr) {
  TokenSeq seq;
  for (const auto& v : arr) seq.push_back(token(v.get<std::size_t>()));
  return seq;
}

inline Json to_json(const IterationRecord& it) {
  Json j{{"drafted", tokens_to_json(it.drafted)},
         {"accept_count", it.accept_count},
         {"rejected_at", nullptr},
         {"emitted", tokens_to_json(it.emitted)},
         {"uniform_draws", it.uniform_draws}};
  if (it.rejected_at) j["rejected_at"] = *it.rejected_at;
  return j;
}

inline Json to_json(const DecodeTrace& trace) {
  Json iters = Json::array();
  for (const auto& it : trace.iterations) iters.push_back(to_json(it));
  return Json{{"prompt", tokens_to_json(trace.prompt)},
              {"iterations", std::move(iters)},
              {"output", tokens_to_json(trace.output)}};
}

}  // namespace speclab
