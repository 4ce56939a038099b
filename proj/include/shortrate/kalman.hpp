#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "shortrate/panel.hpp"
#include "shortrate/term_structure.hpp"

namespace shortrate {

/// Raised when the innovation covariance stops being positive definite or the
/// recursion produces non-finite values. Carries the offending date.
class FilterDegenerate : public std::runtime_error {
public:
    FilterDegenerate(const std::string& date, const std::string& what)
        : std::runtime_error("filter degenerate at " + date + ": " + what), date_(date) {}
    const std::string& date() const { return date_; }

private:
    std::string date_;
};

/// One day of filter state. On days with missing observations the
/// innovation-related quantities have the reduced dimension and `observed`
/// lists the surviving maturity columns.
struct FilterStep {
    Eigen::VectorXd x_pred, x_filt;
    Eigen::MatrixXd p_pred, p_filt;
    Eigen::VectorXd innovation;
    Eigen::MatrixXd innovation_cov;
    Eigen::MatrixXd gain;
    std::vector<int> observed;
};

struct FilterOutput {
    double loglik = 0.0;
    std::vector<FilterStep> steps;
};

/// Kalman filter pass over the panel. Initializes from the stationary law
/// (x0 = eta, P0 = stationary variances), then iterates predict / innovate /
/// update, recomputing Q_t from the previous filtered state each day. The
/// log-likelihood is the Gaussian innovation density,
///   -(N/2) log 2pi - 1/2 sum log|P_zz,t| - 1/2 sum u_t' P_zz,t^{-1} u_t,
/// with N the total number of scalar observations.
FilterOutput filter(const ModelSpec& spec, const YieldPanel& panel);

/// Per-day sum of the filtered factors, the model's short rate.
std::vector<double> filtered_short_rate(const FilterOutput& out);

}  // namespace shortrate
