#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "shortrate/factor.hpp"
#include "shortrate/panel.hpp"
#include "shortrate/term_structure.hpp"

// Independent oracles used by the unit and acceptance suites. Everything here
// deliberately avoids the library's closed-form/filter code paths it checks.
namespace oracles {

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Euler-Maruyama Monte Carlo zero-coupon prices E[exp(-int r)] for a Vasicek
/// factor, trapezoid integral, one estimate per maturity. Maturities must lie
/// on the step grid (steps_per_year * T integral).
std::vector<McEstimate> mc_price_vasicek(const shortrate::FactorParams& p, double r0,
                                         const std::vector<double>& maturities, int paths,
                                         int steps_per_year, std::uint64_t seed);

/// Full-truncation Euler Monte Carlo prices for a CIR factor.
std::vector<McEstimate> mc_price_cir(const shortrate::FactorParams& p, double r0,
                                     const std::vector<double>& maturities, int paths,
                                     int steps_per_year, std::uint64_t seed);

/// 5-point central finite difference of a scalar function.
double fd_derivative(const std::function<double(double)>& f, double x, double h);

/// 5-point central finite-difference gradient, component step
/// h_i = scale * max(1, |x_i|).
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double scale);

/// Log-density of the stacked observation vector of an all-Vasicek model,
/// assembled brute-force from the joint Gaussian law (stationary start).
double joint_gaussian_loglik(const shortrate::ModelSpec& spec, const shortrate::YieldPanel& panel);

/// Golden-section minimizer on [lo, hi].
double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol);

/// Acklam's inverse normal CDF.
double normal_quantile(double p);
double normal_pdf(double x);

}  // namespace oracles
