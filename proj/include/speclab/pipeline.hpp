#pragma once

// Cycle-level model of a hardware verification unit.
//
// The target distributions of one iteration, (gamma + 1) x vocab_size
// logits, sit in an on-chip SRAM buffer. Drafted tokens enter a linear
// pipeline at one token per cycle and pass through four logical operations:
//
//   fetch    read q_t(x_t) (or the argmax flag of row t) from the buffer
//   ratio    a_t = min(1, q_t(x_t) / p_t(x_t))
//   compare  accept bit = r_t < a_t   (greedy: x_t == argmax q_t)
//   commit   commit while no earlier token was rejected, squash afterwards
//
// The operations are spread across `pipeline_depth` physical stages; with
// fewer than four stages several operations share a stage. Every token gets
// a decision; only the first rejection gates commits.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "speclab/errors.hpp"
#include "speclab/model_zoo.hpp"
#include "speclab/specdec.hpp"

namespace speclab {

struct PipelineConfig {
  std::size_t pipeline_depth = 4;
  double clock_hz = 500e6;
  std::uint64_t sram_capacity_bytes = 1u << 20;
  std::size_t bytes_per_logit = 2;
  std::size_t vocab_size = 50257;

  void validate() const {
    if (pipeline_depth < 1) throw RangeError("pipeline_depth must be >= 1");
    if (!(clock_hz > 0.0)) throw RangeError("clock_hz must be > 0");
    if (sram_capacity_bytes < 1) throw RangeError("sram_capacity_bytes must be > 0");
    if (bytes_per_logit < 1) throw RangeError("bytes_per_logit must be >= 1");
    if (vocab_size < 2) throw RangeError("vocab_size must be >= 2");
  }

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

inline std::uint64_t logit_buffer_bytes(std::size_t gamma, std::size_t vocab_size, std::size_t bytes_per_logit) {
  return static_cast<std::uint64_t>(gamma + 1) * vocab_size * bytes_per_logit;
}

struct SramFit {
  bool fits = false;
  std::uint64_t required_bytes = 0;
  std::uint64_t capacity_bytes = 0;
  std::uint64_t deficit_bytes = 0;  // 0 when it fits
};

inline SramFit check_sram_fit(std::size_t gamma, const PipelineConfig& config) {
  SramFit r;
  r.required_bytes = logit_buffer_bytes(gamma, config.vocab_size, config.bytes_per_logit);
  r.capacity_bytes = config.sram_capacity_bytes;
  r.fits = r.required_bytes <= r.capacity_bytes;
  r.deficit_bytes = r.fits ? 0 : r.required_bytes - r.capacity_bytes;
  return r;
}

struct VerifyUnitResult {
  std::uint64_t cycles = 0;
  std::vector<bool> decisions;
  std::size_t committed = 0;
  std::size_t squashed = 0;
  bool rejected = false;
  double tokens_per_second = 0.0;
};

/// Steady verification rate: gamma tokens per (depth + gamma - 1) cycles.
inline double verified_tokens_per_sec(const PipelineConfig& config, std::size_t gamma) {
  if (gamma == 0) throw RangeError("verification rate is undefined for gamma = 0");
  const double g = static_cast<double>(gamma);
  return g * config.clock_hz / static_cast<double>(config.pipeline_depth + gamma - 1);
}

namespace detail {

enum class Op : std::size_t { kFetch = 0, kRatio = 1, kCompare = 2, kCommit = 3 };

constexpr std::size_t stage_of(Op op, std::size_t depth) noexcept {
  return static_cast<std::size_t>(op) * (depth - 1) / 3;
}

struct Slot {
  std::size_t position = 0;
  double q = 0.0;
  double p = 0.0;
  bool greedy_match = false;
  double ratio = 0.0;
  bool accept = false;
};

// SRAM-resident logit rows of one iteration.
class LogitBuffer {
 public:
  LogitBuffer(const std::vector<ProbDist>& rows, const PipelineConfig& config) : rows_(rows) {
    for (const auto& r : rows) {
      if (r.size() != config.vocab_size) throw ShapeError("buffered row width differs from configured vocab_size");
    }
  }

  double read(std::size_t row, TokenId x) const { return rows_[row][x]; }
  bool is_argmax(std::size_t row, TokenId x) const { return argmax_token(rows_[row]) == x; }

 private:
  const std::vector<ProbDist>& rows_;
};

}  // namespace detail

/// Replays one recorded iteration through the pipeline. The record supplies
/// drafted tokens, draft probabilities, buffered target rows and acceptance
/// draws; the decisions are recomputed here.
inline VerifyUnitResult simulate_verification(const IterationRecord& iteration, const PipelineConfig& config) {
  using detail::Op;
  config.validate();
  const std::size_t gamma = iteration.drafted.size();
  const SramFit fit = check_sram_fit(gamma, config);
  if (!fit.fits) {
    throw CapacityError("logit buffer needs " + std::to_string(fit.required_bytes) + " B, SRAM holds " +
                        std::to_string(fit.capacity_bytes) + " B");
  }
  if (iteration.target_dists.size() != gamma + 1 || iteration.draft_dists.size() != gamma) {
    throw ShapeError("iteration record has inconsistent distribution counts");
  }
  const bool sampling = iteration.mode == DecodeMode::kSampling;
  if (sampling && iteration.uniform_draws.size() != gamma) {
    throw ShapeError("sampling-mode record must carry one acceptance draw per drafted token");
  }

  VerifyUnitResult res;
  res.decisions.assign(gamma, false);
  if (gamma == 0) return res;

  const detail::LogitBuffer sram(iteration.target_dists, config);
  const std::size_t depth = config.pipeline_depth;
  std::vector<std::optional<detail::Slot>> stages(depth);
  std::size_t issued = 0;
  std::size_t retired = 0;

  auto run_ops = [&](std::size_t stage, detail::Slot& s) {
    const TokenId x = iteration.drafted[s.position];
    if (detail::stage_of(Op::kFetch, depth) == stage) {
      if (sampling) {
        s.q = sram.read(s.position, x);
        s.p = iteration.draft_dists[s.position][x];
      } else {
        s.greedy_match = sram.is_argmax(s.position, x);
      }
    }
    if (detail::stage_of(Op::kRatio, depth) == stage && sampling) {
      s.ratio = acceptance_probability(s.q, s.p);
    }
    if (detail::stage_of(Op::kCompare, depth) == stage) {
      s.accept = sampling ? iteration.uniform_draws[s.position] < s.ratio : s.greedy_match;
    }
    if (detail::stage_of(Op::kCommit, depth) == stage) {
      res.decisions[s.position] = s.accept;
      if (res.rejected) {
        ++res.squashed;
      } else if (s.accept) {
        ++res.committed;
      } else {
        res.rejected = true;
      }
    }
  };

  while (retired < gamma) {
    // advance: the last stage retires, everything else shifts down one
    if (stages[depth - 1]) {
      stages[depth - 1].reset();
      ++retired;
    }
    for (std::size_t s = depth - 1; s > 0; --s) {
      stages[s] = std::move(stages[s - 1]);
      stages[s - 1].reset();
    }
    if (issued < gamma) stages[0] = detail::Slot{issued++};
    if (retired == gamma) break;

    for (std::size_t s = 0; s < depth; ++s) {
      if (stages[s]) run_ops(s, *stages[s]);
    }
    ++res.cycles;
  }

  res.tokens_per_second = static_cast<double>(gamma) * config.clock_hz / static_cast<double>(res.cycles);
  return res;
}

}  // namespace speclab
