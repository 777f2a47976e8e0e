#include "metaxplain/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

#include "metaxplain/common.hpp"

namespace metaxplain {

namespace {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Tie statistics over one series: sum t(t-1)/2, sum t(t-1)(t-2),
// sum t(t-1)(2t+5) across tie groups.
struct TieStats {
  double pairs = 0.0;
  double x0 = 0.0;
  double x1 = 0.0;
};

TieStats tie_stats(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  TieStats s;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i + 1;
    while (j < v.size() && v[j] == v[i]) ++j;
    const double t = static_cast<double>(j - i);
    s.pairs += t * (t - 1.0) / 2.0;
    s.x0 += t * (t - 1.0) * (t - 2.0);
    s.x1 += t * (t - 1.0) * (2.0 * t + 5.0);
    i = j;
  }
  return s;
}

}  // namespace

Correlation kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InputError("kendall_tau_b: series lengths differ");
  const std::size_t n = x.size();
  if (n < 2) return {0.0, 1.0, true};

  long long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      const double s = dx * dy;
      if (s > 0) ++concordant;
      else if (s < 0) ++discordant;
    }
  }
  const double cmd = static_cast<double>(concordant - discordant);
  const TieStats tx = tie_stats(x);
  const TieStats ty = tie_stats(y);
  const double tot = static_cast<double>(n) * (static_cast<double>(n) - 1.0) / 2.0;
  const double den = std::sqrt(tot - tx.pairs) * std::sqrt(tot - ty.pairs);
  if (den == 0.0) return {0.0, 1.0, true};

  Correlation r;
  r.statistic = cmd / den;

  // Asymptotic variance of (C - D) under independence, tie-corrected.
  const double m = static_cast<double>(n) * (static_cast<double>(n) - 1.0);
  double var = (m * (2.0 * n + 5.0) - tx.x1 - ty.x1) / 18.0 + (2.0 * tx.pairs * ty.pairs) / m;
  if (tx.x0 != 0.0 && ty.x0 != 0.0 && n > 2)
    var += tx.x0 * ty.x0 / (9.0 * m * (static_cast<double>(n) - 2.0));
  if (var <= 0.0) {
    r.p_value = 1.0;
  } else {
    const double z = cmd / std::sqrt(var);
    r.p_value = 2.0 * normal_sf(std::abs(z));
  }
  return r;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && v[idx[j]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0 + 1.0;
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = avg;
    i = j;
  }
  return ranks;
}

Correlation spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InputError("spearman_rho: series lengths differ");
  const std::size_t n = x.size();
  if (n < 2) return {0.0, 1.0, true};

  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rx[i] - mean;
    const double b = ry[i] - mean;
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, 1.0, true};

  Correlation r;
  r.statistic = sxy / std::sqrt(sxx * syy);
  // Clamp rounding spill before the t transform.
  r.statistic = std::clamp(r.statistic, -1.0, 1.0);
  if (n <= 2) {
    r.p_value = 1.0;
  } else if (std::abs(r.statistic) == 1.0) {
    r.p_value = 0.0;
  } else {
    const double df = static_cast<double>(n) - 2.0;
    const double t = r.statistic * std::sqrt(df / (1.0 - r.statistic * r.statistic));
    boost::math::students_t_distribution<double> dist(df);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return r;
}

double chi2_2x2_pvalue(long long n00, long long n01, long long n10, long long n11) {
  if (n00 < 0 || n01 < 0 || n10 < 0 || n11 < 0) throw InputError("chi2_2x2_pvalue: negative count");
  const double r0 = static_cast<double>(n00 + n01);
  const double r1 = static_cast<double>(n10 + n11);
  const double c0 = static_cast<double>(n00 + n10);
  const double c1 = static_cast<double>(n01 + n11);
  const double n = r0 + r1;
  if (r0 == 0.0 || r1 == 0.0 || c0 == 0.0 || c1 == 0.0) return 1.0;
  const double det = static_cast<double>(n00) * static_cast<double>(n11) -
                     static_cast<double>(n01) * static_cast<double>(n10);
  const double chi2 = n * det * det / (r0 * r1 * c0 * c1);
  boost::math::chi_squared_distribution<double> dist(1.0);
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

F1Scores f1_scores(const std::vector<int>& y_true, const std::vector<int>& y_pred, int num_classes) {
  if (y_true.size() != y_pred.size()) throw InputError("f1_scores: prediction/label lengths differ");
  if (num_classes <= 0) throw InputError("f1_scores: num_classes must be positive");
  std::vector<long long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      throw InputError("f1_scores: class index out of range");
    if (t == p) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  F1Scores out;
  long long tp_all = 0, fp_all = 0, fn_all = 0;
  for (int c = 0; c < num_classes; ++c) {
    const double den = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    out.macro += den > 0 ? 2.0 * static_cast<double>(tp[c]) / den : 0.0;
    tp_all += tp[c];
    fp_all += fp[c];
    fn_all += fn[c];
  }
  out.macro /= static_cast<double>(num_classes);
  const double den = static_cast<double>(2 * tp_all + fp_all + fn_all);
  out.micro = den > 0 ? 2.0 * static_cast<double>(tp_all) / den : 0.0;
  return out;
}

}  // namespace metaxplain
