#include "svit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "svit/errors.hpp"

namespace svit {

namespace {

void require_binary(std::span<const int> labels) {
    bool has0 = false, has1 = false;
    for (int l : labels) {
        if (l == 0)
            has0 = true;
        else if (l == 1)
            has1 = true;
        else
            throw ValidationError("labels must be 0/1, got " + std::to_string(l));
    }
    if (!has0 || !has1) throw ValidationError("both classes must be present");
}

// Midranks (1-based, ties averaged) of v.
std::vector<double> midranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
        i = j + 1;
    }
    return rank;
}

// DeLong placement values: per-positive and per-negative structural
// components whose means are the AUC.
struct Placements {
    double theta = 0.0;
    std::vector<double> v10;  // one per positive
    std::vector<double> v01;  // one per negative
};

Placements placements(std::span<const double> scores, std::span<const int> labels) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i)
        (labels[i] == 1 ? pos : neg).push_back(scores[i]);
    const std::size_t m = pos.size(), n = neg.size();

    std::vector<double> all(pos);
    all.insert(all.end(), neg.begin(), neg.end());
    const std::vector<double> r_all = midranks(all);
    const std::vector<double> r_pos = midranks(pos);
    const std::vector<double> r_neg = midranks(neg);

    Placements p;
    p.v10.resize(m);
    p.v01.resize(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        p.v10[i] = (r_all[i] - r_pos[i]) / static_cast<double>(n);
        sum += r_all[i];
    }
    p.theta = (sum - static_cast<double>(m) * (m + 1) / 2.0) /
              (static_cast<double>(m) * static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j)
        p.v01[j] = 1.0 - (r_all[m + j] - r_neg[j]) / static_cast<double>(m);
    return p;
}

double sample_cov(std::span<const double> a, double ma, std::span<const double> b, double mb) {
    if (a.size() < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(a.size() - 1);
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw DimensionError("auc: " + std::to_string(scores.size()) + " scores vs " +
                             std::to_string(labels.size()) + " labels");
    require_binary(labels);
    return placements(scores, labels).theta;
}

DelongResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                         std::span<const int> labels) {
    if (scores_a.size() != labels.size() || scores_b.size() != labels.size())
        throw DimensionError("delong_test: score/label sizes disagree");
    require_binary(labels);

    const Placements pa = placements(scores_a, labels);
    const Placements pb = placements(scores_b, labels);
    const std::size_t m = pa.v10.size();
    const std::size_t n = pa.v01.size();

    const double s10_aa = sample_cov(pa.v10, pa.theta, pa.v10, pa.theta);
    const double s10_bb = sample_cov(pb.v10, pb.theta, pb.v10, pb.theta);
    const double s10_ab = sample_cov(pa.v10, pa.theta, pb.v10, pb.theta);
    const double s01_aa = sample_cov(pa.v01, pa.theta, pa.v01, pa.theta);
    const double s01_bb = sample_cov(pb.v01, pb.theta, pb.v01, pb.theta);
    const double s01_ab = sample_cov(pa.v01, pa.theta, pb.v01, pb.theta);

    DelongResult res;
    res.auc_a = pa.theta;
    res.auc_b = pb.theta;
    res.var_diff = (s10_aa + s10_bb - 2.0 * s10_ab) / static_cast<double>(m) +
                   (s01_aa + s01_bb - 2.0 * s01_ab) / static_cast<double>(n);
    const double diff = pa.theta - pb.theta;
    if (res.var_diff <= 0.0 || !std::isfinite(res.var_diff)) {
        if (std::abs(diff) <= 1e-12) {
            res.z = 0.0;
            res.p = 1.0;
        } else {
            res.z = std::numeric_limits<double>::quiet_NaN();
            res.p = std::numeric_limits<double>::quiet_NaN();
            res.degenerate = true;
        }
        return res;
    }
    res.z = diff / std::sqrt(res.var_diff);
    res.p = normal_two_sided_p(res.z);
    return res;
}

McNemarResult mcnemar_test(std::span<const int> correct_a, std::span<const int> correct_b) {
    if (correct_a.size() != correct_b.size())
        throw DimensionError("mcnemar_test: paired vectors differ in length");
    if (correct_a.empty()) throw ValidationError("mcnemar_test: empty input");
    McNemarResult res;
    for (std::size_t i = 0; i < correct_a.size(); ++i) {
        const int a = correct_a[i], b = correct_b[i];
        if ((a != 0 && a != 1) || (b != 0 && b != 1))
            throw ValidationError("mcnemar_test: correctness indicators must be 0/1");
        if (a == 0 && b == 1) ++res.b01;
        if (a == 1 && b == 0) ++res.b10;
    }
    const std::size_t t = res.b01 + res.b10;
    if (t == 0) {
        res.exact = true;
        res.p = 1.0;
        return res;
    }
    if (t < 25) {
        // Exact two-sided binomial(t, 1/2): double the smaller tail, capped.
        res.exact = true;
        const std::size_t k = std::min(res.b01, res.b10);
        double tail = 0.0;
        double binom = 1.0;  // C(t, 0)
        for (std::size_t i = 0; i <= k; ++i) {
            tail += binom;
            binom = binom * static_cast<double>(t - i) / static_cast<double>(i + 1);
        }
        res.p = std::min(1.0, 2.0 * std::ldexp(tail, -static_cast<int>(t)));
        return res;
    }
    const double num = std::abs(static_cast<double>(res.b01) - static_cast<double>(res.b10)) - 1.0;
    res.statistic = num * num / static_cast<double>(t);
    res.p = std::erfc(std::sqrt(res.statistic / 2.0));  // chi2(1) upper tail
    return res;
}

ConfusionMetrics confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                                   double threshold) {
    if (scores.size() != labels.size())
        throw DimensionError("confusion_metrics: score/label sizes disagree");
    if (scores.empty()) throw ValidationError("confusion_metrics: empty input");
    ConfusionMetrics cm;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw ValidationError("confusion_metrics: labels must be 0/1");
        const bool pred = scores[i] >= threshold;
        if (labels[i] == 1)
            (pred ? cm.tp : cm.fn)++;
        else
            (pred ? cm.fp : cm.tn)++;
    }
    const double total = static_cast<double>(scores.size());
    cm.accuracy = (cm.tp + cm.tn) / total;
    const std::size_t pos = cm.tp + cm.fn, neg = cm.tn + cm.fp;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    cm.sensitivity_defined = pos > 0;
    cm.sensitivity = pos > 0 ? static_cast<double>(cm.tp) / pos : nan;
    cm.specificity_defined = neg > 0;
    cm.specificity = neg > 0 ? static_cast<double>(cm.tn) / neg : nan;
    cm.balanced_accuracy_defined = cm.sensitivity_defined && cm.specificity_defined;
    cm.balanced_accuracy =
        cm.balanced_accuracy_defined ? 0.5 * (cm.sensitivity + cm.specificity) : nan;
    const std::size_t f1_den = 2 * cm.tp + cm.fp + cm.fn;
    cm.f1_defined = f1_den > 0;
    cm.f1 = f1_den > 0 ? 2.0 * cm.tp / static_cast<double>(f1_den) : nan;
    return cm;
}

double crossover_n(const AucCurve& spectral, const AucCurve& spatial, double delta) {
    if (spectral.n_grid != spatial.n_grid)
        throw ValidationError("crossover_n: the two curves must share one sample-size grid");
    const std::size_t k = spectral.n_grid.size();
    if (k == 0 || spectral.mean_auc.size() != k || spatial.mean_auc.size() != k)
        throw ValidationError("crossover_n: malformed curves");
    for (std::size_t i = 1; i < k; ++i)
        if (spectral.n_grid[i] <= spectral.n_grid[i - 1])
            throw ValidationError("crossover_n: sample-size grid must be strictly increasing");

    std::vector<double> diff(k);
    for (std::size_t i = 0; i < k; ++i) diff[i] = spectral.mean_auc[i] - spatial.mean_auc[i];

    if (diff[0] < delta) return spectral.n_grid[0];
    for (std::size_t i = 1; i < k; ++i) {
        if (diff[i] >= delta) continue;
        // Interpolate the advantage linearly in log10(N) between grid points.
        const double t = (diff[i - 1] - delta) / (diff[i - 1] - diff[i]);
        const double lg = std::log10(spectral.n_grid[i - 1]) +
                          t * (std::log10(spectral.n_grid[i]) - std::log10(spectral.n_grid[i - 1]));
        return std::pow(10.0, lg);
    }
    return std::numeric_limits<double>::infinity();
}

}  // namespace svit
