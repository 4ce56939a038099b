#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace shortrate {

/// (1 - exp(-x)) / x for x >= 0, accurate down to x = 0.
inline double expm1_over(double x) {
    if (x < 1e-10) {
        // second-order series; below the threshold it agrees with the
        // closed form to full double precision and avoids 0/0 at x = 0
        return 1.0 - x / 2.0 + x * x / 6.0;
    }
    return -std::expm1(-x) / x;
}

/// 1 - (1 - exp(-x)) / x = x/2 - x^2/6 + ... without cancellation.
inline double one_minus_expm1_over(double x) {
    if (x < 1e-3) {
        return x * (1.0 / 2 + x * (-1.0 / 6 + x * (1.0 / 24 + x * (-1.0 / 120 + x / 720))));
    }
    return 1.0 - expm1_over(x);
}

/// (1 - exp(-x) - x*exp(-x)) / x^2, the derivative kernel of expm1_over.
/// Series 1/2 - x/3 + x^2/8 - x^3/30 + x^4/144 - ...
inline double dexpm1_over(double x) {
    if (x < 0.02) {
        return 1.0 / 2 + x * (-1.0 / 3 + x * (1.0 / 8 + x * (-1.0 / 30 + x * (1.0 / 144 - x / 840))));
    }
    return (-std::expm1(-x) - x * std::exp(-x)) / (x * x);
}

/// (x^2*exp(-x) + 2x*exp(-x) - 2(1-exp(-x))) / x^3, second derivative kernel.
/// Series -1/3 + x/4 - x^2/10 + x^3/36 - 29 x^4/5040 + ...
inline double d2expm1_over(double x) {
    if (x < 0.02) {
        return -1.0 / 3 + x * (1.0 / 4 + x * (-1.0 / 10 + x * (1.0 / 36 - x * (29.0 / 5040))));
    }
    const double ex = std::exp(-x);
    return (x * x * ex + 2.0 * x * ex + 2.0 * std::expm1(-x)) / (x * x * x);
}

/// Running compensated (Neumaier) sum; the result is independent of how the
/// inputs were produced, as long as they are added in the same order.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Percentile of a sample by linear interpolation between order statistics
/// (inclusive method): rank p/100*(N-1), interpolated. `sorted` must be
/// ascending and non-empty; p in [0, 100].
inline double percentile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("percentile of empty sample");
    if (!(p >= 0.0 && p <= 100.0)) throw std::invalid_argument("percentile level outside [0,100]");
    if (sorted.size() == 1) return sorted[0];
    const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double w = pos - static_cast<double>(lo);
    return sorted[lo] + w * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace shortrate
