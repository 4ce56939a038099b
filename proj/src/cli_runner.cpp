#include "shortrate/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "shortrate/io.hpp"
#include "shortrate/kalman.hpp"
#include "shortrate/rng.hpp"

namespace shortrate::cli {

namespace {

namespace fs = std::filesystem;

/// days since 1970-01-01 for a civil date (proleptic Gregorian)
long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, int& y, int& m, int& d) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long yy = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

std::string iso_date_plus_days(const std::string& iso, int offset) {
    int y = 0, m = 0, d = 0;
    if (std::sscanf(iso.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
        throw ParseError("start_date '" + iso + "' is not an ISO date");
    long z = days_from_civil(y, m, d) + offset;
    civil_from_days(z, y, m, d);
    std::ostringstream os;
    os << std::setfill('0') << std::setw(4) << y << '-' << std::setw(2) << m << '-' << std::setw(2)
       << d;
    return os.str();
}

int classify_exception(const std::exception& e, std::ostream& err) {
    err << "error: " << e.what() << '\n';
    if (dynamic_cast<const FilterDegenerate*>(&e) || dynamic_cast<const CalibrationFailed*>(&e))
        return kExitNumericalFailure;
    return kExitInputError;
}

void print_metrics_table(std::ostream& out, const std::vector<double>& maturities,
                         const std::vector<double>& ape, const std::vector<double>& rmse,
                         double ape_total, double rmse_total) {
    out << std::setw(12) << "maturity";
    for (double m : maturities) out << std::setw(9) << format_double(m);
    out << std::setw(9) << "total" << '\n';
    out << std::setw(12) << "APE (pp)" << std::fixed << std::setprecision(2);
    for (double a : ape) out << std::setw(9) << a * 100.0;
    out << std::setw(9) << ape_total * 100.0 << '\n';
    out << std::setw(12) << "RMSE (bp)";
    for (double r : rmse) out << std::setw(9) << r * 1e4;
    out << std::setw(9) << rmse_total * 1e4 << '\n';
    out.unsetf(std::ios::fixed);
    out << std::setprecision(6);
}

Eigen::VectorXd state_from_args(const ForecastArgs& args, int d) {
    if (args.state_csv) {
        std::vector<double> vals;
        std::stringstream ss(*args.state_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            double v = 0.0;
            const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
            if (res.ec != std::errc() || res.ptr != item.data() + item.size())
                throw ParseError("cannot parse state value '" + item + "'");
            vals.push_back(v);
        }
        if (static_cast<int>(vals.size()) != d)
            throw ParseError("state has " + std::to_string(vals.size()) + " values, model has " +
                             std::to_string(d) + " factors");
        Eigen::VectorXd x(d);
        for (int i = 0; i < d; ++i) x(i) = vals[static_cast<std::size_t>(i)];
        return x;
    }
    if (args.state_file) {
        std::ifstream in(*args.state_file);
        if (!in) throw ParseError("cannot open state file '" + *args.state_file + "'");
        std::string line, last;
        std::getline(in, line);  // header
        while (std::getline(in, line))
            if (!line.empty()) last = line;
        if (last.empty()) throw ParseError("state file has no data rows");
        std::stringstream ss(last);
        std::string item;
        std::vector<std::string> cells;
        while (std::getline(ss, item, ',')) cells.push_back(item);
        // date, factor1..factord, short_rate
        if (static_cast<int>(cells.size()) < d + 1)
            throw ParseError("state file row has too few columns");
        Eigen::VectorXd x(d);
        for (int i = 0; i < d; ++i) {
            const std::string& cell = cells[static_cast<std::size_t>(i + 1)];
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x(i));
            if (res.ec != std::errc()) throw ParseError("cannot parse state file value '" + cell + "'");
        }
        return x;
    }
    throw ParseError("forecast needs --state or --state-file");
}

}  // namespace

int run_calibrate(const CalibrateArgs& args, std::ostream& out, std::ostream& err) {
    try {
        const YieldPanel panel = read_panel_csv(args.panel_path);
        const Config cfg = load_config(args.config_path);
        if (static_cast<int>(cfg.factors.size()) < 1) throw ParseError("config has no factors");

        ModelSpec spec;
        spec.factors = cfg.factors;
        spec.dt = cfg.dt;
        spec.maturities = panel.maturities;
        // placeholder values keep the spec valid while the optimizer searches
        spec.sigma_eps = cfg.params_complete ? cfg.sigma_eps : 0.01;
        for (auto& f : spec.factors) {
            if (!(f.params.kappa > 0.0)) f.params.kappa = 0.1;
            if (!(f.params.theta > 0.0)) f.params.theta = 0.01;
            if (f.params.eta < 0.0) f.params.eta = 0.0;
            if (f.kind == FactorKind::Cir && !(f.params.eta > 0.0)) f.params.eta = 0.01;
        }
        spec.validate();

        const ParamLayout layout = ParamLayout::for_spec(spec);
        const Bounds bounds = cfg.make_bounds(spec, layout);

        CalibrationOptions copt;
        copt.starts = args.starts.value_or(cfg.optimizer.starts);
        copt.seed = args.seed.value_or(cfg.optimizer.seed);
        copt.optimizer.max_iterations = cfg.optimizer.max_iterations;
        copt.optimizer.tolerance = cfg.optimizer.tolerance;
        copt.ape_mode = cfg.ape_mode;
        if (cfg.params_complete && cfg.optimizer.use_initial_values) {
            ModelSpec init = spec;
            init.factors = cfg.factors;
            init.sigma_eps = cfg.sigma_eps;
            copt.initial = layout.pack(init);
        }

        const CalibrationResult result = maximize_likelihood(spec, panel, bounds, copt);
        const ModelSpec best = layout.unpack(spec, result.theta_opt.values);

        fs::create_directories(args.out_dir);
        write_result_json(result, best, args.out_dir + "/result.json");
        write_factors_csv(panel.dates, result.filtered_factors, args.out_dir + "/factors.csv");
        write_fitted_csv(panel, result.fitted, args.out_dir + "/fitted.csv");
        write_residuals_csv(panel, result.fitted, args.out_dir + "/residuals.csv");

        out << "log-likelihood  " << format_double(result.loglik) << '\n';
        out << "AIC             " << format_double(result.aic) << '\n';
        out << "BIC             " << format_double(result.bic) << '\n';
        out << "first-order optimality  " << format_double(result.first_order_optimality) << '\n';
        out << "starts converged  " << result.starts_converged << '/' << result.n_starts << '\n';
        if (result.boundary_hits.empty()) {
            out << "boundary hits   none\n";
        } else {
            out << "boundary hits  ";
            for (const auto& b : result.boundary_hits) out << ' ' << b;
            out << '\n';
        }
        for (int i = 0; i < layout.size(); ++i) {
            out << "  " << layout.name(i) << " = " << format_double(result.theta_opt.values(i))
                << "  (grad " << format_double(result.gradient_at_opt(i)) << ", se ";
            if (result.std_error_defined[static_cast<std::size_t>(i)])
                out << format_double(result.std_errors(i));
            else
                out << "undefined";
            out << ")\n";
        }
        print_metrics_table(out, panel.maturities, result.ape_by_maturity, result.rmse_by_maturity,
                            result.ape_total, result.rmse_total);
        out << "results written to " << args.out_dir << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        return classify_exception(e, err);
    }
}

int run_filter(const FilterArgs& args, std::ostream& out, std::ostream& err) {
    try {
        const YieldPanel panel = read_panel_csv(args.panel_path);
        const Config cfg = load_config(args.config_path);
        const ModelSpec spec = cfg.to_spec(panel.maturities);

        const FilterOutput fo = filter(spec, panel);
        const StateSpaceMatrices ss = build_state_space(spec);
        const int T = panel.n_days();
        Eigen::MatrixXd factors(T, spec.dimension());
        Eigen::MatrixXd fitted(T, panel.n_maturities());
        for (int t = 0; t < T; ++t) {
            factors.row(t) = fo.steps[static_cast<std::size_t>(t)].x_filt.transpose();
            fitted.row(t) =
                model_yields(ss, fo.steps[static_cast<std::size_t>(t)].x_filt).transpose();
        }

        fs::create_directories(args.out_dir);
        write_factors_csv(panel.dates, factors, args.out_dir + "/factors.csv");
        write_fitted_csv(panel, fitted, args.out_dir + "/fitted.csv");
        write_residuals_csv(panel, fitted, args.out_dir + "/residuals.csv");

        const FitMetrics fm = fit_metrics(panel, fitted, cfg.ape_mode);
        out << "log-likelihood  " << format_double(fo.loglik) << '\n';
        print_metrics_table(out, panel.maturities, fm.ape_by_maturity, fm.rmse_by_maturity, fm.ape,
                            fm.rmse);
        out << "results written to " << args.out_dir << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        return classify_exception(e, err);
    }
}

int run_forecast(const ForecastArgs& args, std::ostream& out, std::ostream& err) {
    try {
        const Config cfg = load_config(args.config_path);
        const ModelSpec spec = cfg.to_spec();
        ForecastRequest req = cfg.forecast;
        if (args.horizons) req.horizons = *args.horizons;
        if (args.paths) req.paths = *args.paths;
        if (args.percentiles) req.percentiles = *args.percentiles;
        if (args.seed) req.seed = *args.seed;
        req.validate();

        const Eigen::VectorXd x0 = state_from_args(args, spec.dimension());
        const ForecastResult result = forecast_curves(spec, x0, req);

        fs::create_directories(args.out_dir);
        for (std::size_t h = 0; h < result.tables.size(); ++h) {
            const std::string path = args.out_dir + "/forecast_h" +
                                     std::to_string(result.tables[h].horizon) + ".csv";
            write_forecast_csv(result, static_cast<int>(h), path);
        }
        out << result.tables.size() << " horizon files written to " << args.out_dir << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        return classify_exception(e, err);
    }
}

int run_simulate_panel(const SimulatePanelArgs& args, std::ostream& out, std::ostream& err) {
    try {
        if (args.days < 1) throw ParseError("--days must be >= 1");
        const Config cfg = load_config(args.config_path);
        const ModelSpec spec = cfg.to_spec();
        const std::uint64_t seed = args.seed.value_or(cfg.forecast.seed);
        const int d = spec.dimension();
        const int n = spec.n_maturities();
        const StateSpaceMatrices ss = build_state_space(spec);
        const Eigen::VectorXd h0e = ss.h0.rowwise().sum();

        // factor path stream 0, measurement noise stream 1
        RngStream path_rng(seed, 0);
        RngStream noise_rng(seed, 1);
        Eigen::VectorXd x(d);
        for (int i = 0; i < d; ++i) x(i) = spec.factors[static_cast<std::size_t>(i)].params.eta;

        YieldPanel panel;
        panel.maturities = spec.maturities;
        panel.yields.resize(args.days, n);
        panel.dates.reserve(static_cast<std::size_t>(args.days));
        for (int t = 0; t < args.days; ++t) {
            for (int i = 0; i < d; ++i) {
                const auto& f = spec.factors[static_cast<std::size_t>(i)];
                x(i) = sample_transition(f.kind, f.params, x(i), spec.dt, path_rng);
            }
            for (int j = 0; j < n; ++j)
                panel.yields(t, j) =
                    h0e(j) + ss.h1.row(j).dot(x) + spec.sigma_eps * noise_rng.normal();
            panel.dates.push_back(iso_date_plus_days(cfg.start_date, t));
        }
        panel.validate();
        write_panel_csv(panel, args.out_path);
        out << args.days << " days written to " << args.out_path << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        return classify_exception(e, err);
    }
}

}  // namespace shortrate::cli
