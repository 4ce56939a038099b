#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "shortrate/term_structure.hpp"

namespace shortrate {

struct ForecastRequest {
    std::vector<int> horizons{5, 10, 20, 60, 120, 260};  ///< steps ahead
    int paths = 10000;
    std::vector<double> percentiles{5.0, 95.0};
    std::uint64_t seed = 0;
    bool keep_terminal_states = false;
    void validate() const;
};

/// Simulated factor paths: paths x (steps+1) x d, row 0 is the start state.
struct PathArray {
    int paths = 0, steps = 0, dims = 0;
    std::vector<double> data;
    double operator()(int path, int step, int dim) const {
        return data[(static_cast<std::size_t>(path) * static_cast<std::size_t>(steps + 1) +
                     static_cast<std::size_t>(step)) *
                        static_cast<std::size_t>(dims) +
                    static_cast<std::size_t>(dim)];
    }
};

/// Exact-transition simulation of all factors, path p driven by substream p
/// of `seed`; identical output for any worker count.
PathArray simulate_factors(const ModelSpec& spec, const Eigen::VectorXd& x_start, int steps,
                           int paths, std::uint64_t seed, bool parallel = true);

struct ForecastTable {
    int horizon = 0;
    Eigen::VectorXd mean;               ///< per maturity
    Eigen::MatrixXd percentile_values;  ///< n_maturities x n_percentiles
};

struct ForecastResult {
    std::vector<double> maturities;
    std::vector<double> percentiles;
    std::vector<ForecastTable> tables;           ///< one per horizon
    std::vector<Eigen::MatrixXd> terminal_states;  ///< per horizon, paths x d (opt-in)
};

/// Simulates to each horizon, maps terminal states through the model yield
/// curve, and aggregates mean (compensated, in path order) and percentiles
/// (linear interpolation between order statistics) per maturity.
ForecastResult forecast_curves(const ModelSpec& spec, const Eigen::VectorXd& x_start,
                               const ForecastRequest& req, bool parallel = true);

}  // namespace shortrate
