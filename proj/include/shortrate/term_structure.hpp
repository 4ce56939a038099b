#pragma once

#include <Eigen/Dense>
#include <vector>

#include "shortrate/factor.hpp"

namespace shortrate {

/// A multi-factor model: the short rate is the sum of independent factors,
/// yields are observed on a fixed maturity grid with i.i.d. Gaussian noise.
struct ModelSpec {
    std::vector<Factor> factors;
    double sigma_eps = 0.0;           ///< measurement-noise std, rate units
    double dt = 1.0 / 252.0;          ///< observation step, year fraction
    std::vector<double> maturities;   ///< strictly increasing, positive

    int dimension() const { return static_cast<int>(factors.size()); }
    int n_maturities() const { return static_cast<int>(maturities.size()); }
    /// Throws std::invalid_argument on violated invariants.
    void validate() const;
};

/// State-space form of the model:
///   x_t = phi0 + diag(phi1) x_{t-1} + v_t,   v_t ~ N(0, Q_t)
///   z_t = h0*e + h1*x_t + eps_t,             eps_t ~ N(0, sigma_eps^2 I)
/// phi0/phi1 hold the diagonal entries; h0/h1 are n x d with
/// h0(j,i) = -A_i(T_j)/T_j and h1(j,i) = -B_i(T_j)/T_j.
struct StateSpaceMatrices {
    Eigen::VectorXd phi0;
    Eigen::VectorXd phi1;
    Eigen::MatrixXd h0;
    Eigen::MatrixXd h1;
    double sigma_eps2 = 0.0;
};

StateSpaceMatrices build_state_space(const ModelSpec& spec);

/// Model yield curve at factor values x: y_j = sum_i [h0(j,i) + h1(j,i) x_i].
Eigen::VectorXd model_yields(const ModelSpec& spec, const Eigen::VectorXd& x);
Eigen::VectorXd model_yields(const StateSpaceMatrices& ss, const Eigen::VectorXd& x);

/// Diagonal of the one-step process-noise matrix Q_t given the previous state.
/// CIR entries use max(x_prev_i, 0).
Eigen::VectorXd process_noise(const ModelSpec& spec, const Eigen::VectorXd& x_prev);

}  // namespace shortrate
