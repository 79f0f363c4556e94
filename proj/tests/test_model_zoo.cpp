#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "speclab/model_zoo.hpp"

using namespace speclab;

namespace {

double mass(const ProbDist& d) {
  return std::accumulate(d.weights().begin(), d.weights().end(), 0.0);
}

}  // namespace

TEST(ProbDist, RejectsInvalidWeights) {
  EXPECT_THROW(ProbDist({0.5, 0.6}), DistributionError);
  EXPECT_THROW(ProbDist({1.5, -0.5}), DistributionError);
  EXPECT_THROW(ProbDist(std::vector<double>{}), DistributionError);
  EXPECT_THROW(ProbDist::normalized({0.0, 0.0}), DistributionError);
  EXPECT_NO_THROW(ProbDist({0.5, 0.5 + 5e-10}));
}

TEST(ProbDist, SoftmaxSurvivesLargeLogits) {
  const std::vector<double> logits{1000.0, 1000.0, -1000.0};
  const ProbDist d = ProbDist::softmax(logits);
  EXPECT_DOUBLE_EQ(d[0], 0.5);
  EXPECT_DOUBLE_EQ(d[1], 0.5);
  EXPECT_EQ(d[2], 0.0);
}

TEST(BuildTableModel, DeterministicInAllArguments) {
  const TableModel a = build_table_model(7, 2, 0);
  const TableModel b = build_table_model(7, 2, 0);
  ASSERT_EQ(a.context_count(), 1u);
  EXPECT_EQ(a.entry(0), b.entry(0));
  EXPECT_NE(build_table_model(8, 2, 0).entry(0), a.entry(0));
}

TEST(BuildTableModel, EveryContextSumsToOne) {
  const TableModel m = build_table_model(7, 4, 1);
  ASSERT_EQ(m.context_count(), 4u);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_NEAR(mass(m.entry(c)), 1.0, 1e-9);
    for (double w : m.entry(c).weights()) EXPECT_GE(w, 0.0);
  }
}

TEST(BuildTableModel, ContextCapIsEnforced) {
  EXPECT_THROW(build_table_model(1, 2, 30), SizeError);
  EXPECT_THROW(build_table_model(1, 10, 7), SizeError);   // 10^7 > 10^6
  EXPECT_NO_THROW(build_table_model(1, 10, 3));
  EXPECT_THROW(build_table_model(1, 4, 2, /*context_cap=*/15), SizeError);
  EXPECT_THROW(build_table_model(1, 1, 0), RangeError);
}

TEST(BuildTableModel, LogitsFollowTheDocumentedStream) {
  // context-major, token-minor: entry(c)[t] is softmax over normals c*V .. c*V+V-1
  const std::size_t v = 3;
  const TableModel m = build_table_model(99, v, 1);
  const CounterRng rng(99, Stream::kTargetLogits);
  for (std::size_t c = 0; c < v; ++c) {
    std::vector<double> e(v);
    double top = -INFINITY;
    for (std::size_t t = 0; t < v; ++t) top = std::max(top, rng.normal(c * v + t));
    double z = 0.0;
    for (std::size_t t = 0; t < v; ++t) z += e[t] = std::exp(rng.normal(c * v + t) - top);
    for (std::size_t t = 0; t < v; ++t) EXPECT_NEAR(m.entry(c)[t], e[t] / z, 1e-15);
  }
}

TEST(MakeModelPair, FullAgreementCopiesTarget) {
  const ModelPair pair = make_model_pair(11, 8, 1, 1.0);
  for (std::size_t c = 0; c < pair.target.context_count(); ++c) {
    for (std::size_t t = 0; t < 8; ++t) EXPECT_NEAR(pair.draft.entry(c)[t], pair.target.entry(c)[t], 1e-12);
  }
}

TEST(MakeModelPair, ZeroAgreementDiffers) {
  const ModelPair pair = make_model_pair(3, 8, 1, 0.0);
  bool differs = false;
  for (std::size_t c = 0; c < pair.target.context_count(); ++c) {
    differs |= pair.draft.entry(c) != pair.target.entry(c);
  }
  EXPECT_TRUE(differs);
}

TEST(MakeModelPair, RejectsAgreementOutOfRange) {
  EXPECT_THROW(make_model_pair(1, 4, 1, 1.5), RangeError);
  EXPECT_THROW(make_model_pair(1, 4, 1, -0.1), RangeError);
}

TEST(MakeModelPair, TargetMatchesBuildTableModel) {
  const ModelPair pair = make_model_pair(5, 6, 2, 0.3);
  const TableModel t = build_table_model(5, 6, 2);
  for (std::size_t c = 0; c < t.context_count(); ++c) EXPECT_EQ(pair.target.entry(c), t.entry(c));
}

TEST(MakeModelPair, MeanTotalVariationShrinksWithAgreement) {
  double prev = INFINITY;
  for (double a : {0.0, 0.5, 1.0}) {
    double total = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const ModelPair pair = make_model_pair(seed, 16, 1, a);
      for (std::size_t c = 0; c < 16; ++c, ++n) total += total_variation(pair.draft.entry(c), pair.target.entry(c));
    }
    const double mean = total / static_cast<double>(n);
    EXPECT_LE(mean, prev) << "agreement " << a;
    prev = mean;
    if (a == 1.0) {
      EXPECT_EQ(mean, 0.0);
    }
  }
}

TEST(NextDist, OrderZeroIgnoresContext) {
  const TableModel m = build_table_model(2, 5, 0);
  const TokenSeq a{token(1), token(4)};
  const TokenSeq b{};
  EXPECT_EQ(&m.next_dist(a), &m.next_dist(b));
}

TEST(NextDist, KeysOnTrailingTokens) {
  const TableModel m = build_table_model(2, 2, 1);
  const TokenSeq a{token(0), token(1)};
  const TokenSeq b{token(1), token(1)};
  EXPECT_EQ(m.next_dist(a), m.next_dist(b));
  EXPECT_EQ(m.next_dist(a), m.entry(1));
}

TEST(NextDist, ShortContextIsAnError) {
  const TableModel m = build_table_model(2, 2, 1);
  EXPECT_THROW(m.next_dist(TokenSeq{}), ContextError);
  const TokenSeq bad{token(7)};
  EXPECT_THROW(m.next_dist(bad), RangeError);
}

TEST(SampleToken, InverseCdf) {
  const ProbDist half({0.5, 0.5});
  EXPECT_EQ(sample_token(half, 0.49), token(0));
  EXPECT_EQ(sample_token(half, 0.50), token(1));  // cumsum 0.5 is not > 0.5
  const ProbDist point({1.0, 0.0});
  for (double u : {0.0, 0.3, 0.999999}) EXPECT_EQ(sample_token(point, u), token(0));
  EXPECT_THROW(sample_token(half, 1.0), RangeError);
  EXPECT_THROW(sample_token(half, -0.1), RangeError);
}

TEST(SampleToken, NeverReturnsZeroWeightTokenAtTheTop) {
  const ProbDist d({0.3, 0.7, 0.0});
  EXPECT_EQ(sample_token(d, std::nextafter(1.0, 0.0)), token(1));
}

TEST(ArgmaxToken, LowestIndexWinsTies) {
  EXPECT_EQ(argmax_token(ProbDist({0.9, 0.1})), token(0));
  EXPECT_EQ(argmax_token(ProbDist({0.1, 0.9})), token(1));
  EXPECT_EQ(argmax_token(ProbDist({0.5, 0.5})), token(0));
  EXPECT_EQ(argmax_token(ProbDist({0.2, 0.4, 0.4})), token(1));
}

TEST(CounterRng, UniformsInRangeAndStreamsIndependent) {
  const CounterRng a(1, Stream::kDecode);
  const CounterRng b(1, Stream::kPrompt);
  int same = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const double u = a.uniform(i);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    same += u == b.uniform(i);
  }
  EXPECT_EQ(same, 0);
}

TEST(CounterRng, NormalMoments) {
  const CounterRng rng(42, Stream::kSuite);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal(static_cast<std::uint64_t>(i));
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}
