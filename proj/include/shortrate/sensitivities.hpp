#pragma once

#include <Eigen/Dense>
#include <array>

#include "shortrate/kalman.hpp"
#include "shortrate/params.hpp"

namespace shortrate {

/// Partials of the loadings (A, B) with respect to the factor's own
/// parameters, indexed kappa = 0, eta = 1, theta = 2.
struct LoadingGradient {
    std::array<double, 3> da{};
    std::array<double, 3> db{};
};

/// Symmetric second partials of (A, B), same indexing.
struct LoadingHessian {
    std::array<std::array<double, 3>, 3> d2a{};
    std::array<std::array<double, 3>, 3> d2b{};
};

LoadingGradient loading_gradient(FactorKind kind, const FactorParams& p, double t);
LoadingHessian loading_hessian(FactorKind kind, const FactorParams& p, double t);

/// First (and optionally second) partials of one factor's Q_t diagonal entry
/// with respect to the whole free-parameter vector. For a CIR factor the
/// previous filtered state enters Q_t, so its sensitivities dx_prev (and
/// d2x_prev) chain into the result; Vasicek entries ignore them.
void qnoise_derivatives(FactorKind kind, const FactorParams& p, double dt, double x_prev,
                        const ParamLayout& layout, int factor_index,
                        const Eigen::VectorXd& dx_prev, Eigen::VectorXd& dq,
                        const Eigen::MatrixXd* d2x_prev = nullptr,
                        Eigen::MatrixXd* d2q = nullptr);

struct SensitivityOptions {
    bool want_hessian = false;
    bool parallel = true;
    /// Test hook: start the recursions from zero instead of the stationary
    /// initial-condition derivatives (must be detectably wrong).
    bool zero_initial_conditions = false;
};

struct SensitivityResult {
    double loglik = 0.0;
    Eigen::VectorXd gradient;
    /// Symmetrized Hessian (H + H')/2; empty unless requested.
    Eigen::MatrixXd hessian;
    /// max |H - H'| over entries before symmetrization.
    double hessian_asymmetry = 0.0;
};

/// Forward-mode sensitivity propagation through the Kalman recursion: exact
/// gradient (and Hessian) of the filter log-likelihood with respect to the
/// free parameters. One pass over the panel; per-parameter and per-pair
/// states are updated in place, never materialized across days.
SensitivityResult loglik_sensitivities(const ModelSpec& spec, const YieldPanel& panel,
                                       const SensitivityOptions& options = {});

Eigen::VectorXd loglik_gradient(const ModelSpec& spec, const YieldPanel& panel);
SensitivityResult loglik_hessian(const ModelSpec& spec, const YieldPanel& panel);

}  // namespace shortrate
