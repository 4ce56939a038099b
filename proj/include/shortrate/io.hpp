#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shortrate/calibration.hpp"
#include "shortrate/panel.hpp"
#include "shortrate/scenario.hpp"
#include "shortrate/term_structure.hpp"

namespace shortrate {

/// Input-file problem; message carries row/column or key context.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Shortest decimal representation that parses back to the identical double.
std::string format_double(double v);

/// Panel CSV: header "date,<m1>,<m2>,..." with maturities as decimal year
/// fractions, then one row per day: ISO date followed by decimal yields.
/// Empty cells are missing observations.
YieldPanel read_panel_csv(const std::string& path);
void write_panel_csv(const YieldPanel& panel, const std::string& path);

struct OptimizerConfig {
    int starts = 8;
    std::uint64_t seed = 1;
    int max_iterations = 400;
    double tolerance = 1e-6;
    bool use_initial_values = true;
};

/// Model/run configuration (JSON). Unknown keys are rejected.
struct Config {
    std::vector<Factor> factors;
    bool params_complete = false;  ///< every factor and sigma_eps given values
    double sigma_eps = 0.0;
    double dt = 1.0 / 252.0;
    std::vector<double> maturities;  ///< required for simulate/forecast only
    struct BoundsOverride {
        std::optional<std::pair<double, double>> kappa, eta, theta_vasicek, theta_cir, sigma_eps;
    } bounds;
    OptimizerConfig optimizer;
    ForecastRequest forecast;
    ApeDenominator ape_mode = ApeDenominator::PanelMean;
    std::string start_date = "2000-01-03";  ///< first synthetic panel date

    /// Model with the config's maturity grid; throws if params incomplete or
    /// no maturities were given.
    ModelSpec to_spec() const;
    /// Model on an externally supplied maturity grid (from a panel).
    ModelSpec to_spec(const std::vector<double>& grid) const;
    Bounds make_bounds(const ModelSpec& spec, const ParamLayout& layout) const;
};

Config load_config(const std::string& path);

/// result.json + CSV sidecars (filtered factors, fitted vs market yields,
/// residuals). Serialization is deterministic and numbers round-trip exactly.
void write_result_json(const CalibrationResult& result, const ModelSpec& spec,
                       const std::string& path);
void write_factors_csv(const std::vector<std::string>& dates, const Eigen::MatrixXd& factors,
                       const std::string& path);
void write_fitted_csv(const YieldPanel& panel, const Eigen::MatrixXd& fitted,
                      const std::string& path);
void write_residuals_csv(const YieldPanel& panel, const Eigen::MatrixXd& fitted,
                         const std::string& path);
/// One file per horizon: maturity, mean, then one column per percentile.
void write_forecast_csv(const ForecastResult& result, int table_index, const std::string& path);

}  // namespace shortrate
