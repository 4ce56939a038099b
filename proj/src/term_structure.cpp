#include "shortrate/term_structure.hpp"

#include <cmath>
#include <stdexcept>

namespace shortrate {

void ModelSpec::validate() const {
    if (factors.empty()) throw std::invalid_argument("model needs at least one factor");
    for (const auto& f : factors) validate_params(f.kind, f.params);
    if (!(sigma_eps > 0.0) || !std::isfinite(sigma_eps))
        throw std::invalid_argument("sigma_eps must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (maturities.empty()) throw std::invalid_argument("model needs at least one maturity");
    double prev = 0.0;
    for (double m : maturities) {
        if (!(m > prev) || !std::isfinite(m))
            throw std::invalid_argument("maturities must be positive and strictly increasing");
        prev = m;
    }
}

StateSpaceMatrices build_state_space(const ModelSpec& spec) {
    spec.validate();
    const int d = spec.dimension();
    const int n = spec.n_maturities();
    StateSpaceMatrices ss;
    ss.phi0.resize(d);
    ss.phi1.resize(d);
    ss.h0.resize(n, d);
    ss.h1.resize(n, d);
    ss.sigma_eps2 = spec.sigma_eps * spec.sigma_eps;
    for (int i = 0; i < d; ++i) {
        const auto& f = spec.factors[i];
        const double e1 = std::exp(-f.params.kappa * spec.dt);
        ss.phi1(i) = e1;
        ss.phi0(i) = -std::expm1(-f.params.kappa * spec.dt) * f.params.eta;
        for (int j = 0; j < n; ++j) {
            const double T = spec.maturities[j];
            const Loadings l = factor_loadings(f.kind, T, f.params);
            ss.h0(j, i) = -l.a / T;
            ss.h1(j, i) = -l.b / T;
        }
    }
    return ss;
}

Eigen::VectorXd model_yields(const StateSpaceMatrices& ss, const Eigen::VectorXd& x) {
    if (x.size() != ss.h1.cols()) throw std::invalid_argument("state dimension mismatch");
    if (!x.allFinite()) throw std::invalid_argument("state must be finite");
    return ss.h0.rowwise().sum() + ss.h1 * x;
}

Eigen::VectorXd model_yields(const ModelSpec& spec, const Eigen::VectorXd& x) {
    return model_yields(build_state_space(spec), x);
}

Eigen::VectorXd process_noise(const ModelSpec& spec, const Eigen::VectorXd& x_prev) {
    const int d = spec.dimension();
    if (x_prev.size() != d) throw std::invalid_argument("state dimension mismatch");
    Eigen::VectorXd q(d);
    for (int i = 0; i < d; ++i) {
        const auto& f = spec.factors[i];
        q(i) = conditional_moments(f.kind, f.params, x_prev(i), spec.dt).variance;
    }
    return q;
}

}  // namespace shortrate
