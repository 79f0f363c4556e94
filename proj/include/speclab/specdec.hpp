#pragma once

// Draft / verify / rollback speculative decoding over TableModel pairs.
//
// Per-iteration uniform consumption, in order:
//   1. draft phase: one uniform per drafted token (sampling mode only)
//   2. verify phase: gamma acceptance draws r_1..r_gamma, all drawn up front
//   3. one uniform for the corrected or bonus token (sampling mode only)
// Greedy mode consumes nothing.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "speclab/errors.hpp"
#include "speclab/model_zoo.hpp"
#include "speclab/rng.hpp"

namespace speclab {

enum class DecodeMode { kGreedy, kSampling };

inline const char* to_string(DecodeMode m) noexcept {
  return m == DecodeMode::kGreedy ? "greedy" : "sampling";
}

inline DecodeMode parse_mode(const std::string& s) {
  if (s == "greedy") return DecodeMode::kGreedy;
  if (s == "sampling") return DecodeMode::kSampling;
  throw RangeError("unknown decode mode '" + s + "'");
}

struct SpecConfig {
  std::size_t gamma = 4;
  std::size_t max_new_tokens = 256;
  DecodeMode mode = DecodeMode::kGreedy;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_new_tokens < 1) throw RangeError("max_new_tokens must be >= 1");
  }
};

struct IterationRecord {
  DecodeMode mode = DecodeMode::kGreedy;
  TokenSeq drafted;
  std::vector<ProbDist> draft_dists;
  std::vector<ProbDist> target_dists;  // gamma + 1 entries
  std::size_t accept_count = 0;
  std::optional<std::size_t> rejected_at;
  TokenSeq emitted;
  std::vector<double> uniform_draws;  // acceptance draws r_t, sampling mode only
  std::vector<bool> decisions;        // raw accept bit per drafted position

  std::size_t gamma() const noexcept { return drafted.size(); }

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct DecodeTrace {
  TokenSeq prompt;
  std::vector<IterationRecord> iterations;
  TokenSeq output;
  std::size_t n_final = 0;  // prompt length + every emitted token, before truncation

  friend bool operator==(const DecodeTrace&, const DecodeTrace&) = default;
};

struct DecodeResult {
  TokenSeq output;
  DecodeTrace trace;
};

namespace detail {

inline std::size_t inverse_cdf(std::span<const double> weights, double u) {
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (weights[i] > 0.0) last_positive = i;
    if (cum > u) return i;
  }
  return last_positive;
}

template <UniformSource Rng>
TokenId select(const ProbDist& dist, DecodeMode mode, Rng& rng) {
  return mode == DecodeMode::kGreedy ? argmax_token(dist) : sample_token(dist, rng.next());
}

}  // namespace detail

/// Positive part of q - p, normalized. Throws when q <= p everywhere.
inline std::vector<double> residual_weights(const ProbDist& q, const ProbDist& p) {
  if (q.size() != p.size()) throw ShapeError("residual of distributions with different sizes");
  std::vector<double> w(q.size());
  double mass = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::max(0.0, q[i] - p[i]);
    mass += w[i];
  }
  if (!(mass > 0.0)) throw DegenerateResidualError("residual max(0, q - p) has zero mass");
  for (double& x : w) x /= mass;
  return w;
}

inline ProbDist residual_dist(const ProbDist& q, const ProbDist& p) {
  return ProbDist::normalized(residual_weights(q, p));
}

/// Pluggable residual, so verification suites can be mutation-tested.
using ResidualFn = std::function<std::vector<double>(const ProbDist& q, const ProbDist& p)>;

/// min(1, q/p) for a drafted token with p > 0.
inline double acceptance_probability(double q, double p) noexcept { return std::min(1.0, q / p); }

inline TokenSeq autoregressive_decode(const TableModel& model, const TokenSeq& prompt,
                                      std::size_t max_new_tokens, DecodeMode mode, std::uint64_t seed) {
  if (prompt.size() < model.context_order()) throw ContextError("prompt shorter than model context order");
  UniformStream rng(seed);
  TokenSeq seq = prompt;
  seq.reserve(prompt.size() + max_new_tokens);
  for (std::size_t i = 0; i < max_new_tokens; ++i) {
    seq.push_back(detail::select(model.next_dist(seq), mode, rng));
  }
  return seq;
}

struct DraftResult {
  TokenSeq tokens;
  std::vector<ProbDist> dists;
};

template <UniformSource Rng>
DraftResult draft_phase(const TableModel& draft, std::span<const TokenId> context, std::size_t gamma,
                        DecodeMode mode, Rng& rng) {
  DraftResult out;
  out.tokens.reserve(gamma);
  out.dists.reserve(gamma);
  TokenSeq ctx(context.begin(), context.end());
  for (std::size_t t = 0; t < gamma; ++t) {
    const ProbDist& p = draft.next_dist(ctx);
    const TokenId x = detail::select(p, mode, rng);
    out.dists.push_back(p);
    out.tokens.push_back(x);
    ctx.push_back(x);
  }
  return out;
}

template <UniformSource Rng>
IterationRecord verify_phase(const TokenSeq& drafted, const std::vector<ProbDist>& draft_dists,
                             const std::vector<ProbDist>& target_dists, DecodeMode mode, Rng& rng,
                             const ResidualFn& residual = residual_weights) {
  const std::size_t gamma = drafted.size();
  if (draft_dists.size() != gamma) throw ShapeError("draft_dists length differs from drafted length");
  if (target_dists.size() != gamma + 1) throw ShapeError("target_dists must hold gamma + 1 entries");

  IterationRecord rec;
  rec.mode = mode;
  rec.drafted = drafted;
  rec.draft_dists = draft_dists;
  rec.target_dists = target_dists;
  rec.decisions.resize(gamma);

  if (mode == DecodeMode::kSampling) {
    rec.uniform_draws.resize(gamma);
    for (double& r : rec.uniform_draws) r = rng.next();
  }
  for (std::size_t t = 0; t < gamma; ++t) {
    const TokenId x = drafted[t];
    if (mode == DecodeMode::kSampling) {
      // x was sampled from p, so p(x) > 0
      rec.decisions[t] = rec.uniform_draws[t] < acceptance_probability(target_dists[t][x], draft_dists[t][x]);
    } else {
      rec.decisions[t] = x == argmax_token(target_dists[t]);
    }
  }

  std::size_t accepted = 0;
  while (accepted < gamma && rec.decisions[accepted]) ++accepted;
  rec.accept_count = accepted;
  rec.emitted.assign(drafted.begin(), drafted.begin() + static_cast<std::ptrdiff_t>(accepted));

  if (accepted < gamma) {
    rec.rejected_at = accepted;
    const ProbDist& q = target_dists[accepted];
    if (mode == DecodeMode::kGreedy) {
      rec.emitted.push_back(argmax_token(q));
    } else {
      const auto w = residual(q, draft_dists[accepted]);
      rec.emitted.push_back(token(detail::inverse_cdf(w, rng.next())));
    }
  } else {
    rec.emitted.push_back(detail::select(target_dists[gamma], mode, rng));
  }
  return rec;
}

inline DecodeResult speculative_decode(const ModelPair& pair, const TokenSeq& prompt, const SpecConfig& config) {
  config.validate();
  if (pair.draft.vocab_size() != pair.target.vocab_size() ||
      pair.draft.context_order() != pair.target.context_order()) {
    throw ShapeError("draft and target models disagree on vocabulary or context order");
  }
  if (prompt.size() < pair.target.context_order()) throw ContextError("prompt shorter than model context order");

  UniformStream rng(config.seed);
  DecodeResult res;
  res.trace.prompt = prompt;
  TokenSeq seq = prompt;
  std::size_t generated = 0;

  while (generated < config.max_new_tokens) {
    DraftResult draft = draft_phase(pair.draft, seq, config.gamma, config.mode, rng);

    std::vector<ProbDist> target_dists;
    target_dists.reserve(config.gamma + 1);
    TokenSeq ctx = seq;
    for (std::size_t t = 0; t <= config.gamma; ++t) {
      target_dists.push_back(pair.target.next_dist(ctx));
      if (t < config.gamma) ctx.push_back(draft.tokens[t]);
    }

    IterationRecord rec = verify_phase(draft.tokens, draft.dists, target_dists, config.mode, rng);
    seq.insert(seq.end(), rec.emitted.begin(), rec.emitted.end());
    generated += rec.emitted.size();
    res.trace.iterations.push_back(std::move(rec));
  }

  res.trace.n_final = seq.size();
  seq.resize(prompt.size() + config.max_new_tokens);
  res.trace.output = seq;
  res.output = std::move(seq);
  return res;
}

/// Closed-form marginal of the first emitted token of one draft-verify step
/// with draft p and target q:
///   m(x) = p(x) min(1, q(x)/p(x)) + [sum_y p(y)(1 - min(1, q(y)/p(y)))] residual(x)
inline std::vector<double> emission_weights(const ProbDist& p, const ProbDist& q,
                                            const ResidualFn& residual = residual_weights) {
  if (p.size() != q.size()) throw ShapeError("distributions differ in size");
  std::vector<double> m(p.size());
  double reject_mass = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (p[x] > 0.0) {
      const double a = acceptance_probability(q[x], p[x]);
      m[x] = p[x] * a;
      reject_mass += p[x] * (1.0 - a);
    }
  }
  if (reject_mass > 0.0) {
    const auto r = residual(q, p);
    for (std::size_t x = 0; x < m.size(); ++x) m[x] += reject_mass * r[x];
  }
  return m;
}

inline ProbDist exact_emission_distribution(const ProbDist& p, const ProbDist& q) {
  return ProbDist(emission_weights(p, q));
}

}  // namespace speclab
