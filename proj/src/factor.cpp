#include "shortrate/factor.hpp"

#include <cmath>
#include <stdexcept>

#include "shortrate/numerics.hpp"

namespace shortrate {

namespace {

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void validate_params(FactorKind kind, const FactorParams& p) {
    if (!finite(p.kappa) || !finite(p.eta) || !finite(p.theta))
        throw std::invalid_argument("factor parameters must be finite");
    if (p.kappa <= 0.0) throw std::invalid_argument("kappa must be positive");
    if (p.theta < 0.0) throw std::invalid_argument("theta must be nonnegative");
    if (p.eta < 0.0) throw std::invalid_argument("eta must be nonnegative");
    if (p.eta_fixed_zero && p.eta != 0.0)
        throw std::invalid_argument("eta_fixed_zero requires eta = 0");
    if (kind == FactorKind::Cir && p.eta_fixed_zero)
        throw std::invalid_argument("a CIR factor cannot pin eta to 0");
}

Loadings vasicek_loadings(double t, const FactorParams& p) {
    if (!finite(t) || t < 0.0) throw std::invalid_argument("maturity must be finite and >= 0");
    validate_params(FactorKind::Vasicek, p);
    const double kappa = p.kappa, eta = p.eta, theta = p.theta;
    const double x = kappa * t;
    // u = (1 - e^{-kt})/k = -B(t);  t - u evaluated without cancellation
    const double u = t * expm1_over(x);
    const double t_minus_u = t * one_minus_expm1_over(x);
    const double th2 = theta * theta;
    Loadings l;
    l.b = -u;
    l.a = eta * (u - t) - th2 / (4.0 * kappa) * u * u + th2 / (2.0 * kappa * kappa) * t_minus_u;
    return l;
}

Loadings cir_loadings(double t, const FactorParams& p) {
    if (!finite(t) || t < 0.0) throw std::invalid_argument("maturity must be finite and >= 0");
    validate_params(FactorKind::Cir, p);
    if (p.eta <= 0.0 || p.theta <= 0.0)
        throw std::invalid_argument("CIR loadings need eta > 0 and theta > 0");
    const double kappa = p.kappa, eta = p.eta, theta = p.theta;
    const double b = std::sqrt(kappa * kappa + 2.0 * theta * theta);
    // With emb = e^{-bt}:
    //   A(t) = (2*kappa*eta/theta^2) * [log(2b) + (kappa - b)t/2 - log fden]
    //   B(t) = -2*(1 - emb) / fden,  fden = (kappa + b)(1 - emb) + 2b*emb
    // identical to the textbook a,b form but with a strictly positive log
    // argument and no overflow for large b*t.
    const double emb = std::exp(-b * t);
    const double fden = (kappa + b) * (-std::expm1(-b * t)) + 2.0 * b * emb;
    Loadings l;
    l.b = -2.0 * (-std::expm1(-b * t)) / fden;
    l.a = (2.0 * kappa * eta / (theta * theta)) *
          (std::log(2.0 * b) + 0.5 * (kappa - b) * t - std::log(fden));
    return l;
}

Loadings factor_loadings(FactorKind kind, double t, const FactorParams& p) {
    return kind == FactorKind::Vasicek ? vasicek_loadings(t, p) : cir_loadings(t, p);
}

ConditionalMoments conditional_moments(FactorKind kind, const FactorParams& p, double r_prev,
                                       double dt) {
    validate_params(kind, p);
    if (!finite(dt) || dt <= 0.0) throw std::invalid_argument("dt must be positive");
    if (!finite(r_prev)) throw std::invalid_argument("r_prev must be finite");
    const double kappa = p.kappa, eta = p.eta, theta = p.theta;
    const double e1 = std::exp(-kappa * dt);
    ConditionalMoments m;
    m.mean = eta * (-std::expm1(-kappa * dt)) + e1 * r_prev;
    if (kind == FactorKind::Vasicek) {
        // theta^2 (1 - e^{-2k dt}) / (2k) = theta^2 * dt * expm1_over(2k dt)
        m.variance = theta * theta * dt * expm1_over(2.0 * kappa * dt);
    } else {
        const double one_m_e1 = -std::expm1(-kappa * dt);
        const double r0 = r_prev > 0.0 ? r_prev : 0.0;
        m.variance = eta * theta * theta / (2.0 * kappa) * one_m_e1 * one_m_e1 +
                     r0 * theta * theta / kappa * (e1 - e1 * e1);
    }
    return m;
}

double sample_transition(FactorKind kind, const FactorParams& p, double r_prev, double dt,
                         RngStream& rng) {
    validate_params(kind, p);
    if (!finite(dt) || dt <= 0.0) throw std::invalid_argument("dt must be positive");
    if (!finite(r_prev)) throw std::invalid_argument("r_prev must be finite");
    if (kind == FactorKind::Vasicek) {
        const ConditionalMoments m = conditional_moments(kind, p, r_prev, dt);
        return m.mean + std::sqrt(m.variance) * rng.normal();
    }
    if (p.eta <= 0.0) throw std::invalid_argument("CIR transition needs eta > 0");
    if (p.theta == 0.0) {
        // degenerate: deterministic mean reversion
        return conditional_moments(kind, p, r_prev, dt).mean;
    }
    const double kappa = p.kappa, eta = p.eta, theta = p.theta;
    const double e1 = std::exp(-kappa * dt);
    const double c = 4.0 * kappa / (theta * theta * (-std::expm1(-kappa * dt)));
    const double v = 4.0 * kappa * eta / (theta * theta);
    const double r0 = r_prev > 0.0 ? r_prev : 0.0;
    const double l = c * r0 * e1;
    // noncentral chi^2(v, l) = chi^2_{v + 2J} with J ~ Poisson(l/2)
    const double j = l > 0.0 ? static_cast<double>(rng.poisson(0.5 * l)) : 0.0;
    const double z = rng.gamma(0.5 * v + j, 2.0);
    return z / c;
}

ConditionalMoments stationary_init(FactorKind kind, const FactorParams& p) {
    validate_params(kind, p);
    ConditionalMoments m;
    m.mean = p.eta;
    m.variance = kind == FactorKind::Vasicek
                     ? p.theta * p.theta / (2.0 * p.kappa)
                     : p.eta * p.theta * p.theta / (2.0 * p.kappa);
    return m;
}

bool feller_condition(const FactorParams& p) {
    return 2.0 * p.kappa * p.eta > p.theta * p.theta;
}

}  // namespace shortrate
