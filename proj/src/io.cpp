#include "shortrate/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

namespace shortrate {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, int row, int col, const char* what) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e)
        throw ParseError(std::string("cannot parse ") + what + " '" + s + "' at row " +
                         std::to_string(row) + ", column " + std::to_string(col));
    return v;
}

}  // namespace

YieldPanel read_panel_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open panel file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("panel file '" + path + "' is empty");

    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "date")
        throw ParseError("panel header must start with 'date' followed by maturities");
    YieldPanel panel;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const double m = parse_double(header[c], 1, static_cast<int>(c + 1), "maturity");
        if (!panel.maturities.empty() && m <= panel.maturities.back())
            throw ParseError("header maturities must be strictly increasing at column " +
                             std::to_string(c + 1));
        if (!(m > 0.0)) throw ParseError("maturities must be positive at column " +
                                         std::to_string(c + 1));
        panel.maturities.push_back(m);
    }
    const int n = static_cast<int>(panel.maturities.size());

    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) != n + 1)
            throw ParseError("row " + std::to_string(lineno) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(n + 1));
        if (cells[0].empty())
            throw ParseError("missing date at row " + std::to_string(lineno) + ", column 1");
        if (!panel.dates.empty() && !(panel.dates.back() < cells[0]))
            throw ParseError("dates must be strictly increasing at row " + std::to_string(lineno));
        panel.dates.push_back(cells[0]);
        std::vector<double> vals(static_cast<std::size_t>(n));
        for (int c = 0; c < n; ++c) {
            const std::string& cell = cells[static_cast<std::size_t>(c + 1)];
            vals[static_cast<std::size_t>(c)] =
                cell.empty() ? std::numeric_limits<double>::quiet_NaN()
                             : parse_double(cell, lineno, c + 2, "yield");
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw ParseError("panel file '" + path + "' has no data rows");
    panel.yields.resize(static_cast<Eigen::Index>(rows.size()), n);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (int c = 0; c < n; ++c)
            panel.yields(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    panel.validate();
    return panel;
}

void write_panel_csv(const YieldPanel& panel, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write panel file '" + path + "'");
    out << "date";
    for (double m : panel.maturities) out << ',' << format_double(m);
    out << '\n';
    for (int t = 0; t < panel.n_days(); ++t) {
        out << panel.dates[static_cast<std::size_t>(t)];
        for (int c = 0; c < panel.n_maturities(); ++c) {
            out << ',';
            const double v = panel.yields(t, c);
            if (!std::isnan(v)) out << format_double(v);
        }
        out << '\n';
    }
}

namespace {

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const auto& a : allowed) ok = ok || a == key;
        if (!ok) throw ParseError("unknown key '" + key + "' in " + where);
    }
}

std::pair<double, double> parse_range(const json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 2)
        throw ParseError("bounds." + key + " must be [lower, upper]");
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("config '" + path + "': " + e.what());
    }
    if (!root.is_object()) throw ParseError("config root must be an object");
    reject_unknown_keys(root,
                        {"factors", "sigma_eps", "dt", "maturities", "bounds", "optimizer",
                         "forecast", "ape_denominator", "start_date"},
                        "config");

    Config cfg;
    if (!root.contains("factors") || !root["factors"].is_array() || root["factors"].empty())
        throw ParseError("config needs a non-empty 'factors' array");

    bool all_params = true;
    for (const auto& jf : root["factors"]) {
        reject_unknown_keys(jf, {"kind", "kappa", "eta", "theta", "eta_fixed_zero"},
                            "factors entry");
        if (!jf.contains("kind")) throw ParseError("factor entry needs 'kind'");
        const std::string kind = jf["kind"].get<std::string>();
        Factor f;
        if (kind == "vasicek")
            f.kind = FactorKind::Vasicek;
        else if (kind == "cir")
            f.kind = FactorKind::Cir;
        else
            throw ParseError("factor kind must be 'vasicek' or 'cir', got '" + kind + "'");
        f.params.eta_fixed_zero = jf.value("eta_fixed_zero", false);
        if (f.params.eta_fixed_zero && f.kind == FactorKind::Cir)
            throw ParseError("eta_fixed_zero is only valid for Vasicek factors");
        const bool has = jf.contains("kappa") && jf.contains("theta") &&
                         (jf.contains("eta") || f.params.eta_fixed_zero);
        all_params = all_params && has;
        f.params.kappa = jf.value("kappa", 0.0);
        f.params.eta = f.params.eta_fixed_zero ? 0.0 : jf.value("eta", 0.0);
        f.params.theta = jf.value("theta", 0.0);
        cfg.factors.push_back(f);
    }
    cfg.params_complete = all_params && root.contains("sigma_eps");
    cfg.sigma_eps = root.value("sigma_eps", 0.0);
    cfg.dt = root.value("dt", 1.0 / 252.0);
    if (!(cfg.dt > 0.0)) throw ParseError("dt must be positive");
    if (root.contains("maturities")) {
        for (const auto& m : root["maturities"]) cfg.maturities.push_back(m.get<double>());
        double prev = 0.0;
        for (double m : cfg.maturities) {
            if (!(m > prev)) throw ParseError("maturities must be positive, strictly increasing");
            prev = m;
        }
    }
    if (root.contains("bounds")) {
        const json& jb = root["bounds"];
        reject_unknown_keys(jb, {"kappa", "eta", "theta_vasicek", "theta_cir", "sigma_eps"},
                            "bounds");
        if (jb.contains("kappa")) cfg.bounds.kappa = parse_range(jb["kappa"], "kappa");
        if (jb.contains("eta")) cfg.bounds.eta = parse_range(jb["eta"], "eta");
        if (jb.contains("theta_vasicek"))
            cfg.bounds.theta_vasicek = parse_range(jb["theta_vasicek"], "theta_vasicek");
        if (jb.contains("theta_cir")) cfg.bounds.theta_cir = parse_range(jb["theta_cir"], "theta_cir");
        if (jb.contains("sigma_eps")) cfg.bounds.sigma_eps = parse_range(jb["sigma_eps"], "sigma_eps");
    }
    if (root.contains("optimizer")) {
        const json& jo = root["optimizer"];
        reject_unknown_keys(jo, {"starts", "seed", "max_iterations", "tolerance",
                                 "use_initial_values"},
                            "optimizer");
        cfg.optimizer.starts = jo.value("starts", cfg.optimizer.starts);
        cfg.optimizer.seed = jo.value("seed", cfg.optimizer.seed);
        cfg.optimizer.max_iterations = jo.value("max_iterations", cfg.optimizer.max_iterations);
        cfg.optimizer.tolerance = jo.value("tolerance", cfg.optimizer.tolerance);
        cfg.optimizer.use_initial_values =
            jo.value("use_initial_values", cfg.optimizer.use_initial_values);
        if (cfg.optimizer.starts < 1) throw ParseError("optimizer.starts must be >= 1");
    }
    if (root.contains("forecast")) {
        const json& jf = root["forecast"];
        reject_unknown_keys(jf, {"horizons", "paths", "percentiles", "seed"}, "forecast");
        if (jf.contains("horizons")) {
            cfg.forecast.horizons.clear();
            for (const auto& h : jf["horizons"]) cfg.forecast.horizons.push_back(h.get<int>());
        }
        cfg.forecast.paths = jf.value("paths", cfg.forecast.paths);
        if (jf.contains("percentiles")) {
            cfg.forecast.percentiles.clear();
            for (const auto& p : jf["percentiles"])
                cfg.forecast.percentiles.push_back(p.get<double>());
        }
        cfg.forecast.seed = jf.value("seed", cfg.forecast.seed);
        try {
            cfg.forecast.validate();
        } catch (const std::invalid_argument& e) {
            throw ParseError(std::string("forecast: ") + e.what());
        }
    }
    if (root.contains("ape_denominator")) {
        const std::string mode = root["ape_denominator"].get<std::string>();
        if (mode == "panel")
            cfg.ape_mode = ApeDenominator::PanelMean;
        else if (mode == "per_maturity")
            cfg.ape_mode = ApeDenominator::PerMaturityMean;
        else
            throw ParseError("ape_denominator must be 'panel' or 'per_maturity'");
    }
    cfg.start_date = root.value("start_date", cfg.start_date);
    return cfg;
}

ModelSpec Config::to_spec(const std::vector<double>& grid) const {
    if (!params_complete)
        throw ParseError("config must give kappa/eta/theta for every factor and sigma_eps");
    ModelSpec spec;
    spec.factors = factors;
    spec.sigma_eps = sigma_eps;
    spec.dt = dt;
    spec.maturities = grid;
    spec.validate();
    return spec;
}

ModelSpec Config::to_spec() const {
    if (maturities.empty()) throw ParseError("config needs a 'maturities' list for this command");
    return to_spec(maturities);
}

Bounds Config::make_bounds(const ModelSpec& spec, const ParamLayout& layout) const {
    Bounds b = Bounds::defaults(spec, layout);
    for (int i = 0; i < layout.size(); ++i) {
        const ParamRef& r = layout.ref(i);
        std::optional<std::pair<double, double>> ov;
        if (r.symbol == ParamSymbol::SigmaEps) {
            ov = bounds.sigma_eps;
        } else if (r.symbol == ParamSymbol::Kappa) {
            ov = bounds.kappa;
        } else if (r.symbol == ParamSymbol::Eta) {
            ov = bounds.eta;
        } else {
            const bool cir =
                spec.factors[static_cast<std::size_t>(r.factor)].kind == FactorKind::Cir;
            ov = cir ? bounds.theta_cir : bounds.theta_vasicek;
        }
        if (ov) {
            b.lower(i) = ov->first;
            b.upper(i) = ov->second;
        }
    }
    b.validate();
    return b;
}

void write_result_json(const CalibrationResult& result, const ModelSpec& spec,
                       const std::string& path) {
    json jm;
    jm["dt"] = spec.dt;
    jm["sigma_eps"] = spec.sigma_eps;
    jm["maturities"] = spec.maturities;
    jm["factors"] = json::array();
    for (const auto& f : spec.factors) {
        json jf;
        jf["kind"] = f.kind == FactorKind::Vasicek ? "vasicek" : "cir";
        jf["kappa"] = f.params.kappa;
        jf["eta"] = f.params.eta;
        jf["theta"] = f.params.theta;
        jf["eta_fixed_zero"] = f.params.eta_fixed_zero;
        jm["factors"].push_back(jf);
    }

    json j;
    j["model"] = jm;
    j["loglik"] = result.loglik;
    j["aic"] = result.aic;
    j["bic"] = result.bic;
    j["n_params"] = result.n_params;
    j["n_obs"] = result.n_obs;
    j["first_order_optimality"] = result.first_order_optimality;
    j["hessian_asymmetry"] = result.hessian_asymmetry;
    j["parameters"] = json::object();
    for (int i = 0; i < result.theta_opt.layout.size(); ++i) {
        const std::string name = result.theta_opt.layout.name(i);
        json jp;
        jp["value"] = result.theta_opt.values(i);
        jp["gradient"] = result.gradient_at_opt(i);
        if (result.std_error_defined[static_cast<std::size_t>(i)])
            jp["std_error"] = result.std_errors(i);
        else
            jp["std_error"] = nullptr;
        j["parameters"][name] = jp;
    }
    j["boundary_hits"] = result.boundary_hits;
    j["ape_total"] = result.ape_total;
    j["rmse_total"] = result.rmse_total;
    j["ape_by_maturity"] = result.ape_by_maturity;
    j["rmse_by_maturity"] = result.rmse_by_maturity;
    j["n_starts"] = result.n_starts;
    j["starts_converged"] = result.starts_converged;
    j["starts"] = json::array();
    for (const auto& s : result.starts) {
        json js;
        js["index"] = s.index;
        js["ok"] = s.ok;
        js["converged"] = s.converged;
        js["iterations"] = s.iterations;
        if (s.ok)
            js["loglik"] = s.loglik;
        else
            js["error"] = s.error;
        j["starts"].push_back(js);
    }
    j["feller"] = result.feller;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

void write_factors_csv(const std::vector<std::string>& dates, const Eigen::MatrixXd& factors,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "date";
    for (Eigen::Index i = 0; i < factors.cols(); ++i) out << ",factor" << (i + 1);
    out << ",short_rate\n";
    for (Eigen::Index t = 0; t < factors.rows(); ++t) {
        out << dates[static_cast<std::size_t>(t)];
        for (Eigen::Index i = 0; i < factors.cols(); ++i) out << ',' << format_double(factors(t, i));
        out << ',' << format_double(factors.row(t).sum()) << '\n';
    }
}

void write_fitted_csv(const YieldPanel& panel, const Eigen::MatrixXd& fitted,
                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "date";
    for (double m : panel.maturities) out << ",market_" << format_double(m);
    for (double m : panel.maturities) out << ",model_" << format_double(m);
    out << '\n';
    for (int t = 0; t < panel.n_days(); ++t) {
        out << panel.dates[static_cast<std::size_t>(t)];
        for (int c = 0; c < panel.n_maturities(); ++c) {
            out << ',';
            if (!std::isnan(panel.yields(t, c))) out << format_double(panel.yields(t, c));
        }
        for (int c = 0; c < panel.n_maturities(); ++c) out << ',' << format_double(fitted(t, c));
        out << '\n';
    }
}

void write_residuals_csv(const YieldPanel& panel, const Eigen::MatrixXd& fitted,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "date";
    for (double m : panel.maturities) out << ',' << format_double(m);
    out << '\n';
    for (int t = 0; t < panel.n_days(); ++t) {
        out << panel.dates[static_cast<std::size_t>(t)];
        for (int c = 0; c < panel.n_maturities(); ++c) {
            out << ',';
            if (!std::isnan(panel.yields(t, c)))
                out << format_double(panel.yields(t, c) - fitted(t, c));
        }
        out << '\n';
    }
}

void write_forecast_csv(const ForecastResult& result, int table_index, const std::string& path) {
    const ForecastTable& tab = result.tables[static_cast<std::size_t>(table_index)];
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "maturity,mean";
    for (double p : result.percentiles) out << ",p" << format_double(p);
    out << '\n';
    for (std::size_t j = 0; j < result.maturities.size(); ++j) {
        out << format_double(result.maturities[j]) << ','
            << format_double(tab.mean(static_cast<Eigen::Index>(j)));
        for (Eigen::Index q = 0; q < tab.percentile_values.cols(); ++q)
            out << ',' << format_double(tab.percentile_values(static_cast<Eigen::Index>(j), q));
        out << '\n';
    }
}

}  // namespace shortrate
