#pragma once

// Invariant suites for the decoding core and the verify-unit model, runnable
// from the CLI. Each check stops at its first counterexample.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "speclab/errors.hpp"
#include "speclab/model_zoo.hpp"
#include "speclab/pipeline.hpp"
#include "speclab/rng.hpp"
#include "speclab/specdec.hpp"

namespace speclab {

struct VerifySuiteOptions {
  std::uint64_t seed = 2024;
  std::vector<std::size_t> gamma_list{1, 2, 4, 8};
  std::size_t analytic_pairs = 1000;
  std::size_t monte_carlo_steps = 1'000'000;
  double alpha = 0.001;
  std::size_t greedy_configs = 100;
  std::size_t greedy_tokens = 256;
  std::size_t golden_iterations = 1000;
  ResidualFn residual = residual_weights;
};

struct CheckResult {
  std::string name;
  bool passed = true;
  std::string detail;  // counterexample or summary
};

struct SuiteSummary {
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
  const CheckResult* first_failure() const {
    for (const auto& c : checks) {
      if (!c.passed) return &c;
    }
    return nullptr;
  }
};

/// Residual that skips normalization; used to show the suite catches it.
inline std::vector<double> unnormalized_residual(const ProbDist& q, const ProbDist& p) {
  std::vector<double> w(q.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::max(0.0, q[i] - p[i]);
  return w;
}

/// Random distribution with standard-normal logits scaled by `spread`.
inline ProbDist random_dist(std::size_t vocab, CounterRng rng, std::uint64_t base, double spread = 2.0) {
  std::vector<double> logits(vocab);
  for (std::size_t i = 0; i < vocab; ++i) logits[i] = spread * rng.normal(base + i);
  return ProbDist::softmax(logits);
}

/// Upper-tail probability of a chi-square statistic with `dof` degrees of
/// freedom, for even dof (closed form).
inline double chi_square_survival_even(double stat, std::size_t dof) {
  const double half = stat / 2.0;
  double term = 1.0;
  double sum = 1.0;
  for (std::size_t k = 1; k < dof / 2; ++k) {
    term *= half / static_cast<double>(k);
    sum += term;
  }
  return std::exp(-half) * sum;
}

namespace detail {

inline std::string dist_str(const ProbDist& d) {
  std::ostringstream os;
  os.precision(17);
  os << '[';
  for (std::size_t i = 0; i < d.size(); ++i) os << (i ? ", " : "") << d[i];
  os << ']';
  return os.str();
}

inline std::string seq_str(const TokenSeq& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << index_of(s[i]);
  os << ']';
  return os.str();
}

}  // namespace detail

inline CheckResult check_analytic_equivalence(const VerifySuiteOptions& opt) {
  CheckResult res{"analytic target equivalence", true, ""};
  const CounterRng rng(opt.seed, Stream::kSuite);
  constexpr std::array<std::size_t, 4> vocabs{2, 3, 5, 17};
  double worst = 0.0;
  for (std::size_t i = 0; i < opt.analytic_pairs; ++i) {
    const std::size_t v = vocabs[i % vocabs.size()];
    const ProbDist p = random_dist(v, rng, i * 64);
    const ProbDist q = random_dist(v, rng, i * 64 + 32);
    double dev = 0.0;
    try {
      const auto m = emission_weights(p, q, opt.residual);
      for (std::size_t x = 0; x < v; ++x) dev = std::max(dev, std::abs(m[x] - q[x]));
    } catch (const Error&) {
      dev = INFINITY;
    }
    worst = std::max(worst, dev);
    if (!(dev <= 1e-12)) {
      res.passed = false;
      res.detail = "pair " + std::to_string(i) + " deviation " + std::to_string(dev) + " p=" + detail::dist_str(p) +
                   " q=" + detail::dist_str(q);
      return res;
    }
  }
  std::ostringstream os;
  os << opt.analytic_pairs << " pairs, max deviation " << worst;
  res.detail = os.str();
  return res;
}

/// Chi-square goodness of fit of the first emitted token of single-token
/// draft-verify steps against q, at V = 3.
inline CheckResult check_monte_carlo_equivalence(const VerifySuiteOptions& opt) {
  CheckResult res{"monte carlo target equivalence", true, ""};
  const ProbDist p({0.6, 0.3, 0.1});
  const ProbDist q({0.2, 0.3, 0.5});
  const std::vector<ProbDist> draft_dists{p};
  const std::vector<ProbDist> target_dists{q, q};
  UniformStream rng(opt.seed, Stream::kSuite);
  std::array<std::size_t, 3> counts{};
  for (std::size_t n = 0; n < opt.monte_carlo_steps; ++n) {
    const TokenId x = sample_token(p, rng.next());
    const IterationRecord rec = verify_phase(TokenSeq{x}, draft_dists, target_dists, DecodeMode::kSampling, rng,
                                             opt.residual);
    ++counts[index_of(rec.emitted.front())];
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double expected = q[i] * static_cast<double>(opt.monte_carlo_steps);
    stat += (static_cast<double>(counts[i]) - expected) * (static_cast<double>(counts[i]) - expected) / expected;
  }
  const double pvalue = chi_square_survival_even(stat, 2);
  std::ostringstream os;
  os << opt.monte_carlo_steps << " steps, chi2=" << stat << " p-value=" << pvalue << " counts=[" << counts[0] << ","
     << counts[1] << "," << counts[2] << "] p=" << detail::dist_str(p) << " q=" << detail::dist_str(q);
  res.detail = os.str();
  res.passed = pvalue >= opt.alpha;
  return res;
}

inline CheckResult check_greedy_identity(const VerifySuiteOptions& opt) {
  CheckResult res{"greedy identity", true, ""};
  const CounterRng rng(opt.seed, Stream::kSuite);
  constexpr std::array<std::size_t, 2> vocabs{4, 16};
  std::size_t ran = 0;
  for (std::size_t i = 0; i < opt.greedy_configs; ++i) {
    const std::size_t v = vocabs[i % 2];
    const std::size_t order = (i / 2) % 2;
    const std::size_t gamma = opt.gamma_list[(i / 4) % opt.gamma_list.size()];
    const std::uint64_t model_seed = rng.bits(3 * i);
    const double agreement = rng.uniform(3 * i + 1);
    const std::uint64_t seed = rng.bits(3 * i + 2);
    const ModelPair pair = make_model_pair(model_seed, v, order, agreement);
    const TokenSeq prompt = {token(seed % v), token((seed >> 8) % v)};
    const SpecConfig cfg{gamma, opt.greedy_tokens, DecodeMode::kGreedy, seed};
    const auto spec = speculative_decode(pair, prompt, cfg).output;
    const auto base = autoregressive_decode(pair.target, prompt, opt.greedy_tokens, DecodeMode::kGreedy, seed);
    ++ran;
    if (spec != base) {
      res.passed = false;
      res.detail = "config " + std::to_string(i) + " (V=" + std::to_string(v) + " order=" + std::to_string(order) +
                   " gamma=" + std::to_string(gamma) + " model_seed=" + std::to_string(model_seed) +
                   " agreement=" + std::to_string(agreement) + ") speculative " + detail::seq_str(spec) +
                   " vs target " + detail::seq_str(base);
      return res;
    }
  }
  res.detail = std::to_string(ran) + "/" + std::to_string(opt.greedy_configs) + " identical";
  return res;
}

/// Emission count, trace determinism and the gamma = 0 reduction, over both
/// decode modes.
inline CheckResult check_trace_invariants(const VerifySuiteOptions& opt) {
  CheckResult res{"trace invariants", true, ""};
  const CounterRng rng(opt.seed, Stream::kSuite);
  std::size_t iterations = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    const std::size_t gamma = opt.gamma_list[i % opt.gamma_list.size()];
    const DecodeMode mode = i % 2 ? DecodeMode::kSampling : DecodeMode::kGreedy;
    const std::uint64_t seed = rng.bits(2 * i);
    const ModelPair pair = make_model_pair(rng.bits(2 * i + 1), 8, 1, 0.5);
    const TokenSeq prompt{token(seed % 8)};
    const SpecConfig cfg{gamma, 64, mode, seed};
    const DecodeResult a = speculative_decode(pair, prompt, cfg);
    const std::string where = " (case " + std::to_string(i) + ", gamma=" + std::to_string(gamma) + ", " +
                              to_string(mode) + ", seed=" + std::to_string(seed) + ")";
    for (const auto& it : a.trace.iterations) {
      ++iterations;
      if (it.emitted.size() != it.accept_count + 1 || it.rejected_at.has_value() != (it.accept_count < it.gamma())) {
        res.passed = false;
        res.detail = "emission count violated" + where;
        return res;
      }
    }
    if (speculative_decode(pair, prompt, cfg).trace != a.trace) {
      res.passed = false;
      res.detail = "non-deterministic trace" + where;
      return res;
    }
    const SpecConfig zero{0, 64, mode, seed};
    if (speculative_decode(pair, prompt, zero).output != autoregressive_decode(pair.target, prompt, 64, mode, seed)) {
      res.passed = false;
      res.detail = "gamma=0 differs from target-only decoding" + where;
      return res;
    }
  }
  res.detail = std::to_string(iterations) + " iterations checked";
  return res;
}

/// Pipeline decisions versus verify_phase on recorded iterations.
inline CheckResult check_golden_pipeline(const VerifySuiteOptions& opt) {
  CheckResult res{"golden pipeline equivalence", true, ""};
  const CounterRng rng(opt.seed, Stream::kSuite);
  std::size_t matched = 0;
  for (std::size_t i = 0; i < opt.golden_iterations; ++i) {
    const std::size_t v = 2 + rng.bits(4 * i) % 15;
    const std::size_t gamma = opt.gamma_list[rng.bits(4 * i + 1) % opt.gamma_list.size()];
    const std::uint64_t seed = rng.bits(4 * i + 2);
    const DecodeMode mode = i % 4 == 3 ? DecodeMode::kGreedy : DecodeMode::kSampling;
    const ModelPair pair = make_model_pair(rng.bits(4 * i + 3), v, 1, rng.uniform(4 * i + 3));
    const TokenSeq prompt{token(seed % v)};
    const DecodeResult dec = speculative_decode(pair, prompt, SpecConfig{gamma, 1, mode, seed});
    const IterationRecord& rec = dec.trace.iterations.front();

    PipelineConfig cfg;
    cfg.vocab_size = v;
    cfg.pipeline_depth = 1 + i % 6;
    const VerifyUnitResult hw = simulate_verification(rec, cfg);
    const std::size_t rejected = rec.rejected_at ? 1 : 0;
    const bool ok = hw.decisions == rec.decisions && hw.committed == rec.accept_count &&
                    hw.squashed == gamma - rec.accept_count - rejected &&
                    hw.cycles == (gamma == 0 ? 0 : cfg.pipeline_depth + gamma - 1);
    if (!ok) {
      res.passed = false;
      res.detail = "iteration " + std::to_string(i) + " (V=" + std::to_string(v) + " gamma=" + std::to_string(gamma) +
                   " seed=" + std::to_string(seed) + ") committed " + std::to_string(hw.committed) + " vs accept " +
                   std::to_string(rec.accept_count);
      return res;
    }
    ++matched;
  }
  res.detail = std::to_string(matched) + "/" + std::to_string(opt.golden_iterations) + " iterations match";
  return res;
}

inline SuiteSummary verify_suite(const VerifySuiteOptions& opt = {}) {
  if (opt.gamma_list.empty()) throw ConfigError("gamma_list", "must not be empty");
  SuiteSummary s;
  s.checks.push_back(check_analytic_equivalence(opt));
  s.checks.push_back(check_monte_carlo_equivalence(opt));
  s.checks.push_back(check_greedy_identity(opt));
  s.checks.push_back(check_trace_invariants(opt));
  s.checks.push_back(check_golden_pipeline(opt));
  return s;
}

}  // namespace speclab
