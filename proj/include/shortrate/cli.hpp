#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace shortrate::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNumericalFailure = 3;

struct CalibrateArgs {
    std::string panel_path, config_path, out_dir;
    std::optional<int> starts;
    std::optional<std::uint64_t> seed;
};

struct FilterArgs {
    std::string panel_path, config_path, out_dir;
};

struct ForecastArgs {
    std::string config_path, out_dir;
    std::optional<std::string> state_csv;     ///< comma-separated factor values
    std::optional<std::string> state_file;    ///< factors.csv; last row is used
    std::optional<std::vector<int>> horizons;
    std::optional<int> paths;
    std::optional<std::vector<double>> percentiles;
    std::optional<std::uint64_t> seed;
};

struct SimulatePanelArgs {
    std::string config_path, out_path;
    int days = 0;
    std::optional<std::uint64_t> seed;
};

int run_calibrate(const CalibrateArgs& args, std::ostream& out, std::ostream& err);
int run_filter(const FilterArgs& args, std::ostream& out, std::ostream& err);
int run_forecast(const ForecastArgs& args, std::ostream& out, std::ostream& err);
int run_simulate_panel(const SimulatePanelArgs& args, std::ostream& out, std::ostream& err);

}  // namespace shortrate::cli
