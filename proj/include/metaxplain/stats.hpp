#pragma once

#include <vector>

namespace metaxplain {

struct Correlation {
  double statistic = 0.0;  // tau-b or rho
  double p_value = 1.0;
  bool degenerate = false;  // a constant series makes the statistic undefined
};

// Kendall tau-b (tie-corrected) with the asymptotic normal p-value.
Correlation kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y);

// Spearman rho (average ranks) with the t-distribution p-value.
Correlation spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// Ranks 1..n with ties assigned their average rank.
std::vector<double> average_ranks(const std::vector<double>& v);

// p-value of the 2x2 contingency chi-square test, no continuity correction.
// Degenerate tables (a zero marginal) report p = 1.
double chi2_2x2_pvalue(long long n00, long long n01, long long n10, long long n11);

struct F1Scores {
  double macro = 0.0;
  double micro = 0.0;
};

// Single-label multiclass F1. Classes absent from both truth and prediction
// contribute 0 to the macro average.
F1Scores f1_scores(const std::vector<int>& y_true, const std::vector<int>& y_pred, int num_classes);

}  // namespace metaxplain
