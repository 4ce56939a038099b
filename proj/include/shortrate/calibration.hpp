#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shortrate/optim.hpp"
#include "shortrate/params.hpp"
#include "shortrate/panel.hpp"
#include "shortrate/sensitivities.hpp"

namespace shortrate {

class CalibrationFailed : public std::runtime_error {
public:
    explicit CalibrationFailed(const std::string& what) : std::runtime_error(what) {}
};

enum class ApeDenominator { PanelMean, PerMaturityMean };

struct FitMetrics {
    double ape = 0.0;    ///< Eq. form: mean abs error over mean market yield
    double rmse = 0.0;   ///< root mean squared error, rate units
    std::vector<double> ape_by_maturity;
    std::vector<double> rmse_by_maturity;
};

/// APE and RMSE of fitted vs market yields. `fitted` must have the panel's
/// shape; missing market cells are skipped. The per-maturity APE keeps the
/// panel-wide mean yield in the denominator unless `mode` says otherwise.
FitMetrics fit_metrics(const YieldPanel& panel, const Eigen::MatrixXd& fitted,
                       ApeDenominator mode = ApeDenominator::PanelMean);

/// sqrt(diag((-H)^{-1})); entries with a non-positive diagonal (or a singular
/// matrix) come back NaN with defined[i] = false.
Eigen::VectorXd standard_errors(const Eigen::MatrixXd& hessian, std::vector<bool>& defined);

struct CalibrationOptions {
    int starts = 8;
    std::uint64_t seed = 1;
    optim::Options optimizer;
    /// Replaces start 0 with a user-supplied point (inside bounds).
    std::optional<Eigen::VectorXd> initial;
    bool parallel_starts = true;
    ApeDenominator ape_mode = ApeDenominator::PanelMean;
};

struct StartDiagnostics {
    int index = 0;
    bool ok = false;
    bool converged = false;
    int iterations = 0;
    double loglik = 0.0;
    Eigen::VectorXd theta;
    std::string error;
};

struct CalibrationResult {
    ParamVector theta_opt;
    double loglik = 0.0;
    Eigen::VectorXd gradient_at_opt;
    double first_order_optimality = 0.0;  ///< inf-norm of the projected gradient
    Eigen::MatrixXd hessian;
    double hessian_asymmetry = 0.0;
    Eigen::VectorXd std_errors;
    std::vector<bool> std_error_defined;
    double aic = 0.0, bic = 0.0;
    int n_params = 0, n_obs = 0;
    double ape_total = 0.0, rmse_total = 0.0;
    std::vector<double> ape_by_maturity, rmse_by_maturity;
    Eigen::MatrixXd fitted;               ///< model yields at filtered states
    std::vector<double> short_rate;       ///< per-day sum of filtered factors
    Eigen::MatrixXd filtered_factors;     ///< T x d
    int n_starts = 0, starts_converged = 0;
    std::vector<std::string> boundary_hits;
    std::vector<StartDiagnostics> starts;
    std::vector<bool> feller;             ///< per factor, CIR factors only meaningful
};

/// Multi-start box-constrained maximum likelihood: projected quasi-Newton
/// ascent with the analytic gradient from random feasible starts; the best
/// optimum wins (ties broken by lowest start index). Throws CalibrationFailed
/// when every start fails.
CalibrationResult maximize_likelihood(const ModelSpec& spec, const YieldPanel& panel,
                                      const Bounds& bounds, const CalibrationOptions& options = {});

}  // namespace shortrate
