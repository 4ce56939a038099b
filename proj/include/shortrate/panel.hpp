#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace shortrate {

/// A dated panel of observed zero-coupon yields. Rows are observation days,
/// columns are maturities; NaN marks a missing observation.
struct YieldPanel {
    std::vector<std::string> dates;   ///< ISO-8601, strictly increasing
    std::vector<double> maturities;   ///< strictly increasing, positive
    Eigen::MatrixXd yields;           ///< T x n, decimal rates, NaN = missing

    int n_days() const { return static_cast<int>(yields.rows()); }
    int n_maturities() const { return static_cast<int>(maturities.size()); }
    /// Number of present (non-missing) scalar observations.
    int n_observations() const;
    bool has_missing() const;

    /// Throws std::invalid_argument on violated invariants.
    void validate() const;
};

}  // namespace shortrate
