#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "leo/rng.hpp"
#include "leo/stats.hpp"

namespace leo {
namespace {

// d = nominal - enhanced when enhanced is all zeros.
WilcoxonResult test_on(const std::vector<double>& d, Alternative alt = Alternative::greater,
                       std::size_t exact_limit = 12) {
  return wilcoxon_signed_rank(d, std::vector<double>(d.size(), 0.0), alt, exact_limit);
}

TEST(TrimmedMeanTest, Examples) {
  std::vector<double> v(10);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_DOUBLE_EQ(trimmed_mean_reduction(v), 5.5);
  EXPECT_DOUBLE_EQ(trimmed_mean_reduction(std::vector<double>(7, 4.25)), 4.25);
  EXPECT_THROW(trimmed_mean_reduction({1.0, 2.0}), DomainError);
  EXPECT_THROW(trimmed_mean_reduction(v, 0.5), DomainError);
}

TEST(TrimmedMeanTest, RobustToOutliers) {
  RngStream rng(81, 0);
  std::vector<double> v;
  for (int i = 0; i < 98; ++i) v.push_back(rng.normal(10.0, 2.0));
  v.push_back(1e6);
  v.push_back(-1e6);
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  const double m = trimmed_mean_reduction(v);
  EXPECT_GE(m, sorted[10]);
  EXPECT_LE(m, sorted[89]);
}

TEST(TrimmedMeanTest, PermutationInvariantAndBounded) {
  RngStream rng(82, 0);
  std::mt19937_64 shuffler(82);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v;
    for (int i = 0; i < 3 + t; ++i) v.push_back(rng.normal(0.0, 5.0));
    const double m = trimmed_mean_reduction(v);
    std::shuffle(v.begin(), v.end(), shuffler);
    EXPECT_NEAR(trimmed_mean_reduction(v), m, 1e-12);
    EXPECT_GE(m, *std::min_element(v.begin(), v.end()));
    EXPECT_LE(m, *std::max_element(v.begin(), v.end()));
  }
}

TEST(SuccessRateTest, Examples) {
  EXPECT_DOUBLE_EQ(success_rate({2, 3, 4}, {1, 2, 3}), 1.0);
  EXPECT_DOUBLE_EQ(success_rate({2, 3, 4}, {2, 3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(success_rate({3, 1, 2}, {1, 2, 1}), 2.0 / 3.0);
  EXPECT_THROW(success_rate({1, 2}, {1}), DomainError);
}

TEST(WilcoxonTest, AllPositiveExact) {
  const std::vector<double> d = {0.3, 1.2, 0.5, 2.1, 0.9, 1.7, 0.2, 0.8, 1.1, 2.5};
  const WilcoxonResult r = test_on(d);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.p_value, 1.0 / 1024.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.w_plus, 55.0);
}

TEST(WilcoxonTest, SymmetricDifferences) {
  const std::vector<double> d = {1, -1, 2, -2, 3, -3, 4, -4, 5, -5};
  const WilcoxonResult r = test_on(d);
  // W+ = 27.5 sits at the center of the null; 534 of the 1024 sign patterns reach it.
  EXPECT_NEAR(r.p_value, 534.0 / 1024.0, 1e-12);
}

TEST(WilcoxonTest, AllZeroFlagged) {
  const WilcoxonResult r = test_on(std::vector<double>(12, 0.0));
  EXPECT_TRUE(r.all_zero);
  EXPECT_EQ(r.p_value, 1.0);
}

TEST(WilcoxonTest, ZerosDropped) {
  std::vector<double> d = {0.3, 1.2, 0.5, 2.1, 0.9, 1.7, 0.2, 0.8, 1.1, 2.5, 0.0, 0.0};
  const WilcoxonResult r = test_on(d);
  EXPECT_EQ(r.n_used, 10u);
  EXPECT_NEAR(r.p_value, 1.0 / 1024.0, 1e-12);
}

// References computed with scipy.stats.wilcoxon 1.15 (zero_method="wilcox"; method="approx",
// correction=True for the normal approximation, method="exact" otherwise).
TEST(WilcoxonTest, ReferenceImplementationWithTies) {
  const std::vector<double> d = {1.5, -0.3, 2.0, 2.0, 0.7, -1.1, 3.2, 0.4, -0.4, 1.8, 2.6, -2.0, 0.9, 1.2, 0.05};
  EXPECT_NEAR(test_on(d, Alternative::greater).p_value, 0.023302444226186766, 1e-3);
  EXPECT_NEAR(test_on(d, Alternative::two_sided).p_value, 0.04660488845237353, 1e-3);
  EXPECT_NEAR(wilcoxon_normal_p(d, Alternative::greater), 0.023302444226186766, 1e-12);
}

TEST(WilcoxonTest, ReferenceImplementationMixedSigns) {
  const std::vector<double> d = {-0.5, -1.02, 0.05, 0.72, 1.44, 0.41,  -0.25, -0.48, 1.05, 1.93,
                                 0.57, -0.93, -0.66, 1.9, 0.5,  -1.43, 0.22,  -0.86, -0.33, -0.19};
  EXPECT_NEAR(test_on(d, Alternative::greater).p_value, 0.3825892949052239, 1e-3);
  EXPECT_NEAR(test_on(d, Alternative::two_sided).p_value, 0.7651785898104478, 1e-3);
}

TEST(WilcoxonTest, ReferenceImplementationExact) {
  const std::vector<double> d = {0.8, -0.2, 1.1, 0.5, -0.9, 1.7, 0.3, 1.4, -0.6, 2.2};
  EXPECT_NEAR(test_on(d, Alternative::greater).p_value, 0.052734375, 1e-12);
  EXPECT_NEAR(test_on(d, Alternative::two_sided).p_value, 0.10546875, 1e-12);
}

TEST(WilcoxonTest, NormalApproximationTracksEnumeration) {
  RngStream rng(83, 0);
  for (std::size_t n = 10; n <= 12; ++n) {
    for (int t = 0; t < 200; ++t) {
      std::vector<double> d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (1.0 + static_cast<double>(i));
      EXPECT_NEAR(wilcoxon_normal_p(d), wilcoxon_exact_p(d), 0.02) << "n=" << n;
    }
  }
}

TEST(WilcoxonTest, PValueIsPositive) {
  std::vector<double> d(200);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = 1.0 + static_cast<double>(i);
  const WilcoxonResult r = test_on(d);
  EXPECT_GT(r.p_value, 0.0);
  EXPECT_LT(r.p_value, 1e-30);
}

TEST(WilcoxonTest, LengthMismatch) {
  EXPECT_THROW(wilcoxon_signed_rank({1, 2}, {1}), DomainError);
}

}  // namespace
}  // namespace leo
