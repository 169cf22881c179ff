#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "leo/error.hpp"

namespace leo {

/// Mean after dropping floor(trim_frac * size) values from each end of the sorted list.
inline double trimmed_mean_reduction(std::vector<double> values, double trim_frac = 0.10) {
  if (values.size() < 3) throw DomainError("trimmed_mean_reduction: need at least 3 values");
  if (!(trim_frac >= 0.0 && trim_frac < 0.5)) throw DomainError("trimmed_mean_reduction: trim fraction outside [0, 0.5)");
  std::sort(values.begin(), values.end());
  const auto drop = static_cast<std::size_t>(std::floor(trim_frac * static_cast<double>(values.size())));
  const auto first = values.begin() + static_cast<std::ptrdiff_t>(drop);
  const auto last = values.end() - static_cast<std::ptrdiff_t>(drop);
  return std::accumulate(first, last, 0.0) / static_cast<double>(last - first);
}

/// Fraction of pairs where the enhanced error is strictly below the nominal one.
inline double success_rate(const std::vector<double>& nominal, const std::vector<double>& enhanced) {
  if (nominal.size() != enhanced.size()) throw DomainError("success_rate: length mismatch");
  if (nominal.empty()) throw DomainError("success_rate: empty input");
  std::size_t wins = 0;
  for (std::size_t i = 0; i < nominal.size(); ++i) wins += enhanced[i] < nominal[i] ? 1 : 0;
  return static_cast<double>(wins) / static_cast<double>(nominal.size());
}

enum class Alternative {
  greater,    ///< nominal - enhanced tends to be positive (enhanced is better)
  two_sided,
};

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;
  /// Pairs left after dropping zero differences.
  std::size_t n_used = 0;
  bool exact = false;
  /// Every difference was zero; p is 1 by convention.
  bool all_zero = false;
};

namespace detail {

/// 1-based ranks of |d| with ties given their average rank.
inline std::vector<double> midranks(const std::vector<double>& magnitudes) {
  const std::size_t n = magnitudes.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return magnitudes[a] < magnitudes[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && magnitudes[order[j + 1]] == magnitudes[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

struct SignedRanks {
  std::vector<double> ranks;
  double w_plus = 0.0;
  double tie_term = 0.0;  // sum over tie groups of t^3 - t
};

inline SignedRanks signed_ranks(const std::vector<double>& differences) {
  std::vector<double> nonzero;
  for (double d : differences)
    if (d != 0.0) nonzero.push_back(d);
  std::vector<double> mags(nonzero.size());
  std::transform(nonzero.begin(), nonzero.end(), mags.begin(), [](double d) { return std::abs(d); });
  SignedRanks out;
  out.ranks = midranks(mags);
  for (std::size_t i = 0; i < nonzero.size(); ++i)
    if (nonzero[i] > 0) out.w_plus += out.ranks[i];

  std::vector<double> sorted = mags;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    out.tie_term += t * t * t - t;
    i = j + 1;
  }
  return out;
}

inline double clamp_p(double p) { return std::clamp(p, std::numeric_limits<double>::min(), 1.0); }

}  // namespace detail

/// Exact null distribution by enumerating all 2^n sign assignments of the (mid)ranks.
inline double wilcoxon_exact_p(const std::vector<double>& differences, Alternative alt = Alternative::greater) {
  const detail::SignedRanks sr = detail::signed_ranks(differences);
  const std::size_t n = sr.ranks.size();
  if (n == 0) return 1.0;
  if (n > 24) throw DomainError("wilcoxon_exact_p: enumeration limited to 24 pairs");
  const double tol = 1e-9;
  std::uint64_t upper = 0, lower = 0;
  const std::uint64_t patterns = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::uint64_t{1} << i)) w += sr.ranks[i];
    upper += w >= sr.w_plus - tol ? 1 : 0;
    lower += w <= sr.w_plus + tol ? 1 : 0;
  }
  const double p_upper = static_cast<double>(upper) / static_cast<double>(patterns);
  const double p_lower = static_cast<double>(lower) / static_cast<double>(patterns);
  return alt == Alternative::greater ? p_upper : std::min(1.0, 2.0 * std::min(p_upper, p_lower));
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity correction.
inline double wilcoxon_normal_p(const std::vector<double>& differences, Alternative alt = Alternative::greater) {
  const detail::SignedRanks sr = detail::signed_ranks(differences);
  const double n = static_cast<double>(sr.ranks.size());
  if (n == 0) return 1.0;
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - sr.tie_term / 48.0;
  if (!(var > 0.0)) return 1.0;
  const double sd = std::sqrt(var);
  if (alt == Alternative::greater) {
    const double z = (sr.w_plus - mean - 0.5) / sd;
    return detail::clamp_p(0.5 * std::erfc(z / std::sqrt(2.0)));
  }
  const double z = std::max(0.0, std::abs(sr.w_plus - mean) - 0.5) / sd;
  return detail::clamp_p(std::erfc(z / std::sqrt(2.0)));
}

/// Paired signed-rank test on d = nominal - enhanced. Zero differences are dropped; up to
/// `exact_limit` remaining pairs use exact enumeration, larger samples the normal approximation.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& nominal, const std::vector<double>& enhanced,
                                           Alternative alt = Alternative::greater, std::size_t exact_limit = 12) {
  if (nominal.size() != enhanced.size()) throw DomainError("wilcoxon_signed_rank: length mismatch");
  std::vector<double> d(nominal.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = nominal[i] - enhanced[i];

  WilcoxonResult out;
  const detail::SignedRanks sr = detail::signed_ranks(d);
  out.n_used = sr.ranks.size();
  out.w_plus = sr.w_plus;
  if (out.n_used == 0) {
    out.all_zero = true;
    out.p_value = 1.0;
    return out;
  }
  out.exact = out.n_used <= exact_limit;
  out.p_value = out.exact ? wilcoxon_exact_p(d, alt) : wilcoxon_normal_p(d, alt);
  return out;
}

}  // namespace leo
