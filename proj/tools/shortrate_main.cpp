#include <CLI11.hpp>
#include <iostream>

#include "shortrate/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Multi-factor short-rate yield-curve toolkit"};
    app.require_subcommand(1);

    shortrate::cli::CalibrateArgs cal;
    auto* cal_cmd = app.add_subcommand("calibrate", "Fit a model to a yield panel");
    cal_cmd->add_option("--panel", cal.panel_path, "panel CSV")->required();
    cal_cmd->add_option("--config", cal.config_path, "model config JSON")->required();
    cal_cmd->add_option("--out", cal.out_dir, "output directory")->required();
    int cal_starts = -1;
    std::int64_t cal_seed = -1;
    cal_cmd->add_option("--starts", cal_starts, "multi-start count");
    cal_cmd->add_option("--seed", cal_seed, "multi-start seed");

    shortrate::cli::FilterArgs fil;
    auto* fil_cmd = app.add_subcommand("filter", "Filter a panel at fixed parameters");
    fil_cmd->add_option("--panel", fil.panel_path, "panel CSV")->required();
    fil_cmd->add_option("--config", fil.config_path, "model config JSON with parameters")->required();
    fil_cmd->add_option("--out", fil.out_dir, "output directory")->required();

    shortrate::cli::ForecastArgs fc;
    auto* fc_cmd = app.add_subcommand("forecast", "Monte Carlo yield-curve forecast");
    fc_cmd->add_option("--config", fc.config_path, "model config JSON with parameters")->required();
    fc_cmd->add_option("--out", fc.out_dir, "output directory")->required();
    std::string fc_state, fc_state_file, fc_pcts;
    fc_cmd->add_option("--state", fc_state, "comma-separated factor start values");
    fc_cmd->add_option("--state-file", fc_state_file, "factors.csv; the last row is used");
    std::vector<int> fc_horizons;
    fc_cmd->add_option("--horizons", fc_horizons, "horizons in steps");
    int fc_paths = -1;
    fc_cmd->add_option("--paths", fc_paths, "Monte Carlo paths");
    fc_cmd->add_option("--percentiles", fc_pcts, "comma-separated percentile levels");
    std::int64_t fc_seed = -1;
    fc_cmd->add_option("--seed", fc_seed, "simulation seed");

    shortrate::cli::SimulatePanelArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate-panel", "Generate a synthetic yield panel");
    sim_cmd->add_option("--config", sim.config_path, "model config JSON with parameters")->required();
    sim_cmd->add_option("--days", sim.days, "number of days")->required();
    sim_cmd->add_option("--out", sim.out_path, "output panel CSV")->required();
    std::int64_t sim_seed = -1;
    sim_cmd->add_option("--seed", sim_seed, "simulation seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : shortrate::cli::kExitInputError;
    }

    if (cal_cmd->parsed()) {
        if (cal_starts > 0) cal.starts = cal_starts;
        if (cal_seed >= 0) cal.seed = static_cast<std::uint64_t>(cal_seed);
        return shortrate::cli::run_calibrate(cal, std::cout, std::cerr);
    }
    if (fil_cmd->parsed()) return shortrate::cli::run_filter(fil, std::cout, std::cerr);
    if (fc_cmd->parsed()) {
        if (!fc_state.empty()) fc.state_csv = fc_state;
        if (!fc_state_file.empty()) fc.state_file = fc_state_file;
        if (!fc_horizons.empty()) fc.horizons = fc_horizons;
        if (fc_paths > 0) fc.paths = fc_paths;
        if (!fc_pcts.empty()) {
            std::vector<double> pct;
            std::stringstream ss(fc_pcts);
            std::string item;
            while (std::getline(ss, item, ',')) pct.push_back(std::stod(item));
            fc.percentiles = pct;
        }
        if (fc_seed >= 0) fc.seed = static_cast<std::uint64_t>(fc_seed);
        return shortrate::cli::run_forecast(fc, std::cout, std::cerr);
    }
    if (sim_cmd->parsed()) {
        if (sim_seed >= 0) sim.seed = static_cast<std::uint64_t>(sim_seed);
        return shortrate::cli::run_simulate_panel(sim, std::cout, std::cerr);
    }
    return shortrate::cli::kExitInputError;
}
