#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace doser {

/// Mann-Whitney AUROC: P(score_pos > score_neg) + 0.5 * P(equal), computed
/// via fractional ranks in O(n log n). Exactly equals the pairwise mean.
double auroc(std::span<const double> scores_negative, std::span<const double> scores_positive);

/// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> fractional_ranks(std::span<const double> x);

struct DetectionReport {
    size_t tp = 0, tn = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;
    double auroc = 0.0;
    double threshold_used = 0.0;
    // Zero-denominator rates are reported as 0 with the flag cleared, so CSV
    // consumers never see NaN.
    bool precision_defined = true, recall_defined = true, f1_defined = true;
};

/// Threshold classification (predict OOD iff score > threshold) plus AUROC
/// over the same scores. labels: 1 = OOD (positive), 0 = ID.
DetectionReport confusion(std::span<const double> scores, std::span<const uint8_t> labels,
                          double threshold);

double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of fractional ranks.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace doser
