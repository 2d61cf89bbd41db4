#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace svit {

// Area under the ROC curve by Mann-Whitney midranks; ties between a positive
// and a negative score count 1/2. Both classes must be present.
double auc(std::span<const double> scores, std::span<const int> labels);

// Paired DeLong test for the difference of two correlated AUCs computed on
// the same labeled sample. Two-sided normal p-value. When the variance of the
// difference degenerates to zero: equal AUCs give p = 1; unequal AUCs set
// `degenerate` (no finite z exists).
struct DelongResult {
    double auc_a = 0.0;
    double auc_b = 0.0;
    double var_diff = 0.0;
    double z = 0.0;
    double p = 1.0;
    bool degenerate = false;
};
DelongResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                         std::span<const int> labels);

// McNemar's test on paired correctness indicators. Exact two-sided binomial
// when the discordant count is below 25, else the continuity-corrected
// chi-square approximation.
struct McNemarResult {
    std::size_t b01 = 0;  // a wrong, b right
    std::size_t b10 = 0;  // a right, b wrong
    double statistic = 0.0;  // chi-square path only
    double p = 1.0;
    bool exact = false;
};
McNemarResult mcnemar_test(std::span<const int> correct_a, std::span<const int> correct_b);

// Threshold metrics. A metric whose denominator class is absent is flagged
// undefined and carries NaN rather than a made-up value.
struct ConfusionMetrics {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double balanced_accuracy = 0.0;
    double f1 = 0.0;
    bool sensitivity_defined = false;
    bool specificity_defined = false;
    bool balanced_accuracy_defined = false;
    bool f1_defined = false;
};
ConfusionMetrics confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                                   double threshold = 0.5);

// Sample-size crossover: the smallest grid N at which the spectral advantage
// mean_auc_spectral - mean_auc_spatial first drops below delta, interpolated
// linearly in log10 N between the bracketing grid points. Returns +infinity
// when the advantage stays at or above delta across the grid.
struct AucCurve {
    std::vector<double> n_grid;  // ascending sample sizes
    std::vector<double> mean_auc;
};
double crossover_n(const AucCurve& spectral, const AucCurve& spatial, double delta = 0.01);

}  // namespace svit
