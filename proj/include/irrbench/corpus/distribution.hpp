#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace irrbench::corpus {

struct LabeledScore {
    std::string label;
    double score = 0.0;
};

/// Fixed histogram edges: `bins` equal-width bins over [lo, hi]. Values outside
/// the range are counted in the first or last bin.
struct HistogramConfig {
    double lo = 0.0;
    double hi = 20.0;
    std::size_t bins = 20;

    void validate() const {
        if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
        if (!(hi > lo)) throw std::invalid_argument("histogram hi must exceed lo");
    }
};

struct HistogramBin {
    double left = 0.0;
    double right = 0.0;
    std::size_t count = 0;
};

struct DistributionStats {
    std::string label;
    std::size_t count = 0;
    double mean = 0.0;
    double q1 = 0.0;
    double q2 = 0.0;
    double q3 = 0.0;
    std::vector<HistogramBin> bins;
};

/// Linear-interpolation quantile of sorted data (numpy's default).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Per-label statistics, labels in order of first appearance. Every label in
/// `required_labels` must have at least one item.
inline std::vector<DistributionStats> similarity_distribution(const std::vector<LabeledScore>& items,
                                                              const HistogramConfig& hist = {},
                                                              const std::vector<std::string>& required_labels = {}) {
    hist.validate();
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> groups;
    for (const auto& it : items) {
        if (it.label.empty()) throw std::invalid_argument("item with empty label");
        if (!std::isfinite(it.score)) throw std::invalid_argument("non-finite score for label " + it.label);
        auto [pos, inserted] = groups.try_emplace(it.label);
        if (inserted) order.push_back(it.label);
        pos->second.push_back(it.score);
    }
    for (const auto& label : required_labels) {
        if (!groups.count(label)) throw std::invalid_argument("no items for label '" + label + "'");
    }
    const double width = (hist.hi - hist.lo) / static_cast<double>(hist.bins);
    std::vector<DistributionStats> out;
    for (const auto& label : order) {
        auto values = groups[label];
        std::sort(values.begin(), values.end());
        DistributionStats s;
        s.label = label;
        s.count = values.size();
        double sum = 0.0;
        for (double v : values) sum += v;
        s.mean = sum / static_cast<double>(values.size());
        s.q1 = quantile_sorted(values, 0.25);
        s.q2 = quantile_sorted(values, 0.50);
        s.q3 = quantile_sorted(values, 0.75);
        s.bins.resize(hist.bins);
        for (std::size_t i = 0; i < hist.bins; ++i) {
            s.bins[i].left = hist.lo + width * static_cast<double>(i);
            s.bins[i].right = (i + 1 == hist.bins) ? hist.hi : hist.lo + width * static_cast<double>(i + 1);
        }
        for (double v : values) {
            auto b = static_cast<long long>(std::floor((v - hist.lo) / width));
            b = std::clamp<long long>(b, 0, static_cast<long long>(hist.bins) - 1);
            ++s.bins[static_cast<std::size_t>(b)].count;
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline std::string format_real(double v, int decimals = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

/// CSV columns: label, mean, q1, q2, q3, bin_left, bin_right, count. One row per bin.
inline void write_distribution_csv(std::ostream& out, const std::vector<DistributionStats>& stats) {
    out << "label,mean,q1,q2,q3,bin_left,bin_right,count\n";
    for (const auto& s : stats) {
        for (const auto& b : s.bins) {
            out << s.label << ',' << format_real(s.mean) << ',' << format_real(s.q1) << ',' << format_real(s.q2)
                << ',' << format_real(s.q3) << ',' << format_real(b.left) << ',' << format_real(b.right) << ','
                << b.count << '\n';
        }
    }
}

}  // namespace irrbench::corpus
