#include "doser/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doser/errors.hpp"

namespace doser {

std::vector<double> fractional_ranks(std::span<const double> x) {
    const size_t n = x.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // mean of 1-based ranks i+1..j+1
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double auroc(std::span<const double> neg, std::span<const double> pos) {
    if (neg.empty() || pos.empty()) throw InputError("auroc: both score sets must be nonempty");
    std::vector<double> all;
    all.reserve(neg.size() + pos.size());
    all.insert(all.end(), neg.begin(), neg.end());
    all.insert(all.end(), pos.begin(), pos.end());
    const std::vector<double> ranks = fractional_ranks(all);
    double rank_sum_pos = 0.0;
    for (size_t i = 0; i < pos.size(); ++i) rank_sum_pos += ranks[neg.size() + i];
    const double np = static_cast<double>(pos.size());
    const double nn = static_cast<double>(neg.size());
    const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * nn);
}

DetectionReport confusion(std::span<const double> scores, std::span<const uint8_t> labels,
                          double threshold) {
    if (scores.size() != labels.size()) throw InputError("confusion: length mismatch");
    DetectionReport rep;
    rep.threshold_used = threshold;
    std::vector<double> neg, pos;
    for (size_t i = 0; i < scores.size(); ++i) {
        const bool predicted_ood = scores[i] > threshold;
        if (labels[i]) {
            pos.push_back(scores[i]);
            predicted_ood ? ++rep.tp : ++rep.fn;
        } else {
            neg.push_back(scores[i]);
            predicted_ood ? ++rep.fp : ++rep.tn;
        }
    }
    const auto rate = [](size_t num, size_t den, bool& defined) {
        defined = den > 0;
        return defined ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
    };
    rep.precision = rate(rep.tp, rep.tp + rep.fp, rep.precision_defined);
    rep.recall = rate(rep.tp, rep.tp + rep.fn, rep.recall_defined);
    const double pr = rep.precision + rep.recall;
    rep.f1_defined = rep.precision_defined && rep.recall_defined && pr > 0.0;
    rep.f1 = rep.f1_defined ? 2.0 * rep.precision * rep.recall / pr : 0.0;
    rep.accuracy = scores.empty() ? 0.0
                                  : static_cast<double>(rep.tp + rep.tn) /
                                        static_cast<double>(scores.size());
    rep.auroc = (!neg.empty() && !pos.empty()) ? auroc(neg, pos) : 0.0;
    return rep;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError("pearson: length mismatch");
    if (x.size() < 2) throw InputError("pearson: need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw InputError("pearson: zero variance input");
    return sxy / std::sqrt(sxx * syy);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    const std::vector<double> rx = fractional_ranks(x);
    const std::vector<double> ry = fractional_ranks(y);
    return pearson(rx, ry);
}

}  // namespace doser
