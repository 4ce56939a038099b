#include "shortrate/panel.hpp"

#include <cmath>
#include <stdexcept>

namespace shortrate {

int YieldPanel::n_observations() const {
    int count = 0;
    for (Eigen::Index r = 0; r < yields.rows(); ++r)
        for (Eigen::Index c = 0; c < yields.cols(); ++c)
            if (!std::isnan(yields(r, c))) ++count;
    return count;
}

bool YieldPanel::has_missing() const { return n_observations() != yields.size(); }

void YieldPanel::validate() const {
    if (dates.size() != static_cast<std::size_t>(yields.rows()))
        throw std::invalid_argument("panel: date count does not match row count");
    if (maturities.size() != static_cast<std::size_t>(yields.cols()))
        throw std::invalid_argument("panel: maturity count does not match column count");
    if (dates.empty()) throw std::invalid_argument("panel: no observation days");
    for (std::size_t i = 1; i < dates.size(); ++i)
        if (!(dates[i - 1] < dates[i]))
            throw std::invalid_argument("panel: dates must be strictly increasing (row " +
                                        std::to_string(i + 1) + ")");
    double prev = 0.0;
    for (double m : maturities) {
        if (!(m > prev) || !std::isfinite(m))
            throw std::invalid_argument("panel: maturities must be positive, strictly increasing");
        prev = m;
    }
    for (Eigen::Index r = 0; r < yields.rows(); ++r)
        for (Eigen::Index c = 0; c < yields.cols(); ++c) {
            const double v = yields(r, c);
            if (!std::isnan(v) && !std::isfinite(v))
                throw std::invalid_argument("panel: non-finite yield at row " +
                                            std::to_string(r + 1) + ", column " +
                                            std::to_string(c + 1));
        }
}

}  // namespace shortrate
