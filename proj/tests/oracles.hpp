#ifndef PATCH3D_TESTS_ORACLES_HPP
#define PATCH3D_TESTS_ORACLES_HPP

#include <functional>
#include <set>
#include <vector>

namespace test_support {

// Fraction of (positive, negative) pairs ordered correctly; ties count half.
inline double pairwise_auroc(const std::vector<double>& s, const std::vector<bool>& y)
{
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[i] && !y[j]) {
                pairs += 1.0;
                wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
        }
    }
    return wins / pairs;
}

// Precision at each distinct threshold times the recall gained there.
inline double threshold_aupr(const std::vector<double>& s, const std::vector<bool>& y)
{
    std::set<double, std::greater<>> thresholds(s.begin(), s.end());
    double positives = 0.0;
    for (bool b : y) {
        positives += b ? 1.0 : 0.0;
    }
    double area = 0.0, prev_recall = 0.0;
    for (double t : thresholds) {
        double tp = 0.0, selected = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] >= t) {
                selected += 1.0;
                tp += y[i] ? 1.0 : 0.0;
            }
        }
        const double recall = tp / positives;
        area += (recall - prev_recall) * (tp / selected);
        prev_recall = recall;
    }
    return area;
}

} // namespace test_support

#endif
