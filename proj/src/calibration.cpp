#include "shortrate/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shortrate/kalman.hpp"
#include "shortrate/rng.hpp"

namespace shortrate {

FitMetrics fit_metrics(const YieldPanel& panel, const Eigen::MatrixXd& fitted,
                       ApeDenominator mode) {
    if (fitted.rows() != panel.yields.rows() || fitted.cols() != panel.yields.cols())
        throw std::invalid_argument("fitted yields shape does not match panel");
    const int n = panel.n_maturities();

    double mean_sum = 0.0;
    long mean_count = 0;
    std::vector<double> col_mean_sum(static_cast<std::size_t>(n), 0.0);
    std::vector<long> col_count(static_cast<std::size_t>(n), 0);
    double abs_sum = 0.0, sq_sum = 0.0;
    std::vector<double> col_abs(static_cast<std::size_t>(n), 0.0),
        col_sq(static_cast<std::size_t>(n), 0.0);

    for (Eigen::Index t = 0; t < panel.yields.rows(); ++t)
        for (int j = 0; j < n; ++j) {
            const double mkt = panel.yields(t, j);
            if (std::isnan(mkt)) continue;
            const double diff = mkt - fitted(t, j);
            mean_sum += mkt;
            ++mean_count;
            col_mean_sum[static_cast<std::size_t>(j)] += mkt;
            ++col_count[static_cast<std::size_t>(j)];
            abs_sum += std::abs(diff);
            sq_sum += diff * diff;
            col_abs[static_cast<std::size_t>(j)] += std::abs(diff);
            col_sq[static_cast<std::size_t>(j)] += diff * diff;
        }
    if (mean_count == 0) throw std::invalid_argument("no observations to score");
    const double ybar = mean_sum / static_cast<double>(mean_count);
    if (ybar == 0.0) throw std::invalid_argument("APE undefined: mean market yield is zero");

    FitMetrics m;
    m.ape = abs_sum / static_cast<double>(mean_count) / ybar;
    m.rmse = std::sqrt(sq_sum / static_cast<double>(mean_count));
    m.ape_by_maturity.resize(static_cast<std::size_t>(n));
    m.rmse_by_maturity.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const auto js = static_cast<std::size_t>(j);
        if (col_count[js] == 0) {
            m.ape_by_maturity[js] = std::numeric_limits<double>::quiet_NaN();
            m.rmse_by_maturity[js] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        const double denom = mode == ApeDenominator::PanelMean
                                 ? ybar
                                 : col_mean_sum[js] / static_cast<double>(col_count[js]);
        m.ape_by_maturity[js] = col_abs[js] / static_cast<double>(col_count[js]) / denom;
        m.rmse_by_maturity[js] = std::sqrt(col_sq[js] / static_cast<double>(col_count[js]));
    }
    return m;
}

Eigen::VectorXd standard_errors(const Eigen::MatrixXd& hessian, std::vector<bool>& defined) {
    if (hessian.rows() != hessian.cols()) throw std::invalid_argument("hessian must be square");
    const Eigen::Index np = hessian.rows();
    Eigen::VectorXd se = Eigen::VectorXd::Constant(np, std::numeric_limits<double>::quiet_NaN());
    defined.assign(static_cast<std::size_t>(np), false);

    const Eigen::MatrixXd neg = -hessian;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(neg);
    if (!lu.isInvertible()) return se;  // singular: every entry stays undefined
    const Eigen::MatrixXd cov = lu.inverse();
    for (Eigen::Index i = 0; i < np; ++i) {
        if (cov(i, i) > 0.0 && std::isfinite(cov(i, i))) {
            se(i) = std::sqrt(cov(i, i));
            defined[static_cast<std::size_t>(i)] = true;
        }
    }
    return se;
}

namespace {

double neg_loglik_with_grad(const ModelSpec& base, const ParamLayout& layout,
                            const YieldPanel& panel, const Eigen::VectorXd& theta,
                            Eigen::VectorXd& grad) {
    try {
        const ModelSpec spec = layout.unpack(base, theta);
        const SensitivityResult r = loglik_sensitivities(spec, panel);
        grad = -r.gradient;
        return -r.loglik;
    } catch (const FilterDegenerate&) {
        return std::numeric_limits<double>::infinity();
    } catch (const std::invalid_argument&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace

CalibrationResult maximize_likelihood(const ModelSpec& spec, const YieldPanel& panel,
                                      const Bounds& bounds, const CalibrationOptions& options) {
    spec.validate();
    panel.validate();
    bounds.validate();
    if (options.starts < 1) throw std::invalid_argument("starts must be >= 1");
    const ParamLayout layout = ParamLayout::for_spec(spec);
    if (bounds.lower.size() != layout.size())
        throw std::invalid_argument("bounds size does not match free-parameter count");

    const int ns = options.starts;
    std::vector<StartDiagnostics> diags(static_cast<std::size_t>(ns));
    std::vector<optim::Result> results(static_cast<std::size_t>(ns));

    std::vector<Eigen::VectorXd> start_points(static_cast<std::size_t>(ns));
    for (int s = 0; s < ns; ++s) {
        RngStream rng(options.seed, static_cast<std::uint64_t>(s));
        Eigen::VectorXd x0(layout.size());
        for (int i = 0; i < layout.size(); ++i) x0(i) = rng.uniform(bounds.lower(i), bounds.upper(i));
        start_points[static_cast<std::size_t>(s)] = x0;
    }
    if (options.initial) {
        if (options.initial->size() != layout.size())
            throw std::invalid_argument("initial point size mismatch");
        start_points[0] = bounds.project(*options.initial);
    }

    const auto objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
        return neg_loglik_with_grad(spec, layout, panel, theta, grad);
    };

#pragma omp parallel for schedule(dynamic, 1) if (options.parallel_starts)
    for (int s = 0; s < ns; ++s) {
        StartDiagnostics& dg = diags[static_cast<std::size_t>(s)];
        dg.index = s;
        try {
            results[static_cast<std::size_t>(s)] = optim::minimize_box(
                objective, start_points[static_cast<std::size_t>(s)], bounds.lower, bounds.upper,
                options.optimizer);
            const optim::Result& r = results[static_cast<std::size_t>(s)];
            dg.ok = true;
            dg.converged = r.converged;
            dg.iterations = r.iterations;
            dg.loglik = -r.f;
            dg.theta = r.x;
        } catch (const std::exception& e) {
            dg.ok = false;
            dg.error = e.what();
        }
    }

    int best = -1;
    for (int s = 0; s < ns; ++s) {
        if (!diags[static_cast<std::size_t>(s)].ok) continue;
        if (best < 0 || diags[static_cast<std::size_t>(s)].loglik > diags[static_cast<std::size_t>(best)].loglik)
            best = s;
    }
    if (best < 0) {
        std::string msg = "calibration failed: every start diverged;";
        for (const auto& dg : diags)
            msg += " start " + std::to_string(dg.index) + ": " + dg.error + ";";
        throw CalibrationFailed(msg);
    }

    const optim::Result& opt = results[static_cast<std::size_t>(best)];
    CalibrationResult out;
    out.theta_opt.layout = layout;
    out.theta_opt.values = opt.x;
    out.loglik = -opt.f;
    out.gradient_at_opt = -opt.gradient;
    out.first_order_optimality = opt.projected_gradient_norm;
    out.n_params = layout.size();
    out.n_obs = panel.n_observations();
    out.aic = 2.0 * out.n_params - 2.0 * out.loglik;
    out.bic = out.n_params * std::log(static_cast<double>(out.n_obs)) - 2.0 * out.loglik;
    out.n_starts = ns;
    out.starts = diags;
    for (const auto& dg : diags) out.starts_converged += dg.ok && dg.converged ? 1 : 0;

    const ModelSpec best_spec = layout.unpack(spec, opt.x);
    SensitivityOptions sopt;
    sopt.want_hessian = true;
    const SensitivityResult sens = loglik_sensitivities(best_spec, panel, sopt);
    out.hessian = sens.hessian;
    out.hessian_asymmetry = sens.hessian_asymmetry;
    out.std_errors = standard_errors(sens.hessian, out.std_error_defined);

    const FilterOutput fo = filter(best_spec, panel);
    const StateSpaceMatrices ss = build_state_space(best_spec);
    const int T = panel.n_days();
    const int d = best_spec.dimension();
    out.filtered_factors.resize(T, d);
    out.fitted.resize(T, panel.n_maturities());
    for (int t = 0; t < T; ++t) {
        out.filtered_factors.row(t) = fo.steps[static_cast<std::size_t>(t)].x_filt.transpose();
        out.fitted.row(t) = model_yields(ss, fo.steps[static_cast<std::size_t>(t)].x_filt).transpose();
    }
    out.short_rate = filtered_short_rate(fo);

    const FitMetrics fm = fit_metrics(panel, out.fitted, options.ape_mode);
    out.ape_total = fm.ape;
    out.rmse_total = fm.rmse;
    out.ape_by_maturity = fm.ape_by_maturity;
    out.rmse_by_maturity = fm.rmse_by_maturity;

    for (int i = 0; i < layout.size(); ++i) {
        if (std::abs(opt.x(i) - bounds.lower(i)) <= 1e-10 ||
            std::abs(opt.x(i) - bounds.upper(i)) <= 1e-10)
            out.boundary_hits.push_back(layout.name(i));
    }
    for (const auto& f : best_spec.factors) out.feller.push_back(feller_condition(f.params));
    return out;
}

}  // namespace shortrate
