#pragma once

// Seeded toy autoregressive models: explicit next-token probability tables
// keyed by the trailing `context_order` tokens.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "speclab/errors.hpp"
#include "speclab/rng.hpp"

namespace speclab {

enum class TokenId : std::uint32_t {};

constexpr std::size_t index_of(TokenId t) noexcept { return static_cast<std::size_t>(t); }
constexpr TokenId token(std::size_t i) noexcept { return static_cast<TokenId>(i); }

using TokenSeq = std::vector<TokenId>;

inline constexpr double kDistTolerance = 1e-9;
inline constexpr std::uint64_t kDefaultContextCap = 1'000'000;

/// Normalized probability vector over a vocabulary.
class ProbDist {
 public:
  ProbDist() = default;

  /// Takes weights that must already sum to 1 within kDistTolerance.
  explicit ProbDist(std::vector<double> weights) : w_(std::move(weights)) {
    if (w_.empty()) throw DistributionError("empty distribution");
    double sum = 0.0;
    for (double x : w_) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw DistributionError("negative or non-finite weight");
      sum += x;
    }
    if (std::abs(sum - 1.0) > kDistTolerance) {
      throw DistributionError("weights sum to " + std::to_string(sum));
    }
  }

  /// Scales non-negative weights to unit mass.
  static ProbDist normalized(std::vector<double> weights) {
    double sum = 0.0;
    for (double x : weights) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw DistributionError("negative or non-finite weight");
      sum += x;
    }
    if (!(sum > 0.0)) throw DistributionError("zero total mass");
    for (double& x : weights) x /= sum;
    return ProbDist(std::move(weights));
  }

  /// Softmax with per-vector max subtraction.
  static ProbDist softmax(std::span<const double> logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> w(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) w[i] = std::exp(logits[i] - top);
    return normalized(std::move(w));
  }

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t i) const noexcept { return w_[i]; }
  double operator[](TokenId t) const noexcept { return w_[index_of(t)]; }
  std::span<const double> weights() const noexcept { return w_; }

  friend bool operator==(const ProbDist&, const ProbDist&) = default;

 private:
  std::vector<double> w_;
};

/// Inverse-CDF sample: smallest i with cumsum(weights[0..i]) > u.
inline TokenId sample_token(const ProbDist& dist, double u) {
  if (!(u >= 0.0 && u < 1.0)) throw RangeError("uniform draw outside [0, 1)");
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    cum += dist[i];
    if (dist[i] > 0.0) last_positive = i;
    if (cum > u) return token(i);
  }
  // cumsum fell short of u through rounding
  return token(last_positive);
}

/// Greedy selection; ties go to the lowest index.
inline TokenId argmax_token(const ProbDist& dist) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist[i] > dist[best]) best = i;
  }
  return token(best);
}

struct ModelSpec {
  std::uint64_t seed = 0;
  std::size_t vocab_size = 2;
  std::size_t context_order = 0;
  double agreement = 1.0;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

namespace detail {

inline std::size_t context_count(std::size_t vocab_size, std::size_t order, std::uint64_t cap) {
  std::uint64_t n = 1;
  for (std::size_t k = 0; k < order; ++k) {
    if (n > cap / vocab_size) {
      throw SizeError("vocab_size^context_order exceeds context cap of " + std::to_string(cap));
    }
    n *= vocab_size;
  }
  if (n > cap) throw SizeError("vocab_size^context_order exceeds context cap of " + std::to_string(cap));
  return static_cast<std::size_t>(n);
}

// Row-major logits, context-major then token-minor, which is also the
// counter order of the generator.
inline std::vector<double> draw_logits(std::uint64_t seed, Stream stream, std::size_t contexts,
                                       std::size_t vocab_size) {
  const CounterRng rng(seed, stream);
  std::vector<double> out(contexts * vocab_size);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.normal(i);
  return out;
}

}  // namespace detail

class TableModel {
 public:
  TableModel(std::uint64_t seed, std::size_t vocab_size, std::size_t context_order,
             std::vector<ProbDist> table)
      : seed_(seed), vocab_size_(vocab_size), order_(context_order), table_(std::move(table)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t context_order() const noexcept { return order_; }
  std::size_t context_count() const noexcept { return table_.size(); }

  /// Entry for a context index (base-vocab_size, oldest token most significant).
  const ProbDist& entry(std::size_t context_index) const { return table_.at(context_index); }

  /// Distribution of the next token given the trailing context_order tokens.
  const ProbDist& next_dist(std::span<const TokenId> context) const {
    if (context.size() < order_) {
      throw ContextError("context has " + std::to_string(context.size()) + " tokens, model order is " +
                         std::to_string(order_));
    }
    std::size_t key = 0;
    for (std::size_t i = context.size() - order_; i < context.size(); ++i) {
      const std::size_t t = index_of(context[i]);
      if (t >= vocab_size_) throw RangeError("token id outside vocabulary");
      key = key * vocab_size_ + t;
    }
    return table_[key];
  }

 private:
  std::uint64_t seed_;
  std::size_t vocab_size_;
  std::size_t order_;
  std::vector<ProbDist> table_;
};

inline const ProbDist& next_dist(const TableModel& model, std::span<const TokenId> context) {
  return model.next_dist(context);
}

inline void check_vocab(std::size_t vocab_size) {
  if (vocab_size < 2) throw RangeError("vocab_size must be >= 2");
}

namespace detail {

inline TableModel table_from_logits(std::uint64_t seed, std::size_t vocab_size, std::size_t order,
                                    std::span<const double> logits) {
  const std::size_t contexts = logits.size() / vocab_size;
  std::vector<ProbDist> table;
  table.reserve(contexts);
  for (std::size_t c = 0; c < contexts; ++c) {
    table.push_back(ProbDist::softmax(logits.subspan(c * vocab_size, vocab_size)));
  }
  return TableModel(seed, vocab_size, order, std::move(table));
}

}  // namespace detail

inline TableModel build_table_model(std::uint64_t seed, std::size_t vocab_size, std::size_t context_order,
                                    std::uint64_t context_cap = kDefaultContextCap) {
  check_vocab(vocab_size);
  const std::size_t contexts = detail::context_count(vocab_size, context_order, context_cap);
  const auto logits = detail::draw_logits(seed, Stream::kTargetLogits, contexts, vocab_size);
  return detail::table_from_logits(seed, vocab_size, context_order, logits);
}

struct ModelPair {
  TableModel draft;
  TableModel target;
  double agreement;
};

/// Target from `seed`; draft logits blend target logits with an independent
/// noise stream: agreement * target + (1 - agreement) * noise.
inline ModelPair make_model_pair(std::uint64_t seed, std::size_t vocab_size, std::size_t context_order,
                                 double agreement, std::uint64_t context_cap = kDefaultContextCap) {
  if (!(agreement >= 0.0 && agreement <= 1.0)) throw RangeError("agreement must lie in [0, 1]");
  check_vocab(vocab_size);
  const std::size_t contexts = detail::context_count(vocab_size, context_order, context_cap);
  const auto target_logits = detail::draw_logits(seed, Stream::kTargetLogits, contexts, vocab_size);
  const auto noise = detail::draw_logits(seed, Stream::kDraftNoise, contexts, vocab_size);

  std::vector<double> draft_logits(target_logits.size());
  for (std::size_t i = 0; i < draft_logits.size(); ++i) {
    draft_logits[i] = agreement * target_logits[i] + (1.0 - agreement) * noise[i];
  }
  return ModelPair{detail::table_from_logits(seed, vocab_size, context_order, draft_logits),
                   detail::table_from_logits(seed, vocab_size, context_order, target_logits), agreement};
}

inline ModelPair make_model_pair(const ModelSpec& spec) {
  return make_model_pair(spec.seed, spec.vocab_size, spec.context_order, spec.agreement);
}

/// Half the L1 distance.
inline double total_variation(const ProbDist& a, const ProbDist& b) {
  if (a.size() != b.size()) throw ShapeError("distributions differ in size");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace speclab
