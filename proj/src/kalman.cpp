#include "shortrate/kalman.hpp"

#include <cmath>
#include <numbers>

namespace shortrate {

namespace {

std::vector<int> observed_columns(const Eigen::MatrixXd& yields, Eigen::Index row) {
    std::vector<int> cols;
    cols.reserve(static_cast<std::size_t>(yields.cols()));
    for (Eigen::Index c = 0; c < yields.cols(); ++c)
        if (!std::isnan(yields(row, c))) cols.push_back(static_cast<int>(c));
    return cols;
}

}  // namespace

FilterOutput filter(const ModelSpec& spec, const YieldPanel& panel) {
    spec.validate();
    panel.validate();
    if (spec.maturities != panel.maturities)
        throw std::invalid_argument("panel maturities do not match model maturities");

    const int d = spec.dimension();
    const int n = spec.n_maturities();
    const StateSpaceMatrices ss = build_state_space(spec);
    const Eigen::VectorXd h0_row_sum = ss.h0.rowwise().sum();

    // all-Vasicek models have a state-independent Q, computed once
    bool all_vasicek = true;
    for (const auto& f : spec.factors) all_vasicek &= f.kind == FactorKind::Vasicek;
    Eigen::VectorXd q_cached;
    if (all_vasicek) q_cached = process_noise(spec, Eigen::VectorXd::Zero(d));

    Eigen::VectorXd x(d);
    Eigen::VectorXd p0(d);
    for (int i = 0; i < d; ++i) {
        const auto m = stationary_init(spec.factors[i].kind, spec.factors[i].params);
        x(i) = m.mean;
        p0(i) = m.variance;
    }
    Eigen::MatrixXd p = p0.asDiagonal();

    FilterOutput out;
    out.steps.resize(static_cast<std::size_t>(panel.n_days()));
    double loglik = 0.0;
    const double log2pi = std::log(2.0 * std::numbers::pi);

    for (int t = 0; t < panel.n_days(); ++t) {
        FilterStep& step = out.steps[static_cast<std::size_t>(t)];
        step.observed = observed_columns(panel.yields, t);
        const int nr = static_cast<int>(step.observed.size());

        const Eigen::VectorXd q = all_vasicek ? q_cached : process_noise(spec, x);
        step.x_pred = ss.phi0 + ss.phi1.cwiseProduct(x);
        step.p_pred = ss.phi1.asDiagonal() * p * ss.phi1.asDiagonal();
        step.p_pred += Eigen::MatrixXd(q.asDiagonal());

        if (nr == 0) {
            // nothing observed today: the prediction is the update
            step.x_filt = step.x_pred;
            step.p_filt = step.p_pred;
            step.innovation.resize(0);
            step.innovation_cov.resize(0, 0);
            step.gain.resize(d, 0);
            x = step.x_filt;
            p = step.p_filt;
            continue;
        }

        Eigen::MatrixXd h1(nr, d);
        Eigen::VectorXd z(nr), z_pred(nr);
        for (int r = 0; r < nr; ++r) {
            const int c = step.observed[static_cast<std::size_t>(r)];
            h1.row(r) = ss.h1.row(c);
            z(r) = panel.yields(t, c);
            z_pred(r) = h0_row_sum(c) + ss.h1.row(c).dot(step.x_pred);
        }
        step.innovation = z - z_pred;
        step.innovation_cov = h1 * step.p_pred * h1.transpose();
        step.innovation_cov.diagonal().array() += ss.sigma_eps2;

        const Eigen::LLT<Eigen::MatrixXd> llt(step.innovation_cov);
        if (llt.info() != Eigen::Success)
            throw FilterDegenerate(panel.dates[static_cast<std::size_t>(t)],
                                   "innovation covariance not positive definite");
        const Eigen::MatrixXd l = llt.matrixL();
        double logdet = 0.0;
        for (int r = 0; r < nr; ++r) logdet += 2.0 * std::log(l(r, r));
        const Eigen::VectorXd w = llt.solve(step.innovation);

        loglik += -0.5 * nr * log2pi - 0.5 * logdet - 0.5 * step.innovation.dot(w);
        if (!std::isfinite(loglik))
            throw FilterDegenerate(panel.dates[static_cast<std::size_t>(t)],
                                   "log-likelihood is not finite");

        step.gain = llt.solve(h1 * step.p_pred.transpose()).transpose();
        step.x_filt = step.x_pred + step.gain * step.innovation;
        step.p_filt = step.p_pred - step.gain * h1 * step.p_pred;
        if (!step.x_filt.allFinite() || !step.p_filt.allFinite())
            throw FilterDegenerate(panel.dates[static_cast<std::size_t>(t)],
                                   "filtered state is not finite");
        x = step.x_filt;
        p = step.p_filt;
    }
    out.loglik = loglik;
    return out;
}

std::vector<double> filtered_short_rate(const FilterOutput& out) {
    std::vector<double> r;
    r.reserve(out.steps.size());
    for (const auto& s : out.steps) r.push_back(s.x_filt.sum());
    return r;
}

}  // namespace shortrate
