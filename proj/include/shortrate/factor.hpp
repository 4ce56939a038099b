#pragma once

#include "shortrate/rng.hpp"

namespace shortrate {

enum class FactorKind { Vasicek, Cir };

/// Parameters of one short-rate factor: dr = kappa*(eta - r)dt + theta*dW
/// (Vasicek) or dr = kappa*(eta - r)dt + theta*sqrt(r)dW (CIR).
struct FactorParams {
    double kappa = 0.0;  ///< mean-reversion speed, 1/years
    double eta = 0.0;    ///< long-run level
    double theta = 0.0;  ///< volatility, per sqrt(year)
    /// eta is pinned at 0 and excluded from the free-parameter vector.
    bool eta_fixed_zero = false;
};

struct Factor {
    FactorKind kind = FactorKind::Vasicek;
    FactorParams params;
};

/// Zero-coupon log-price loadings: log B(0,t) = a + b * r0.
struct Loadings {
    double a = 0.0;
    double b = 0.0;
};

struct ConditionalMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Throws std::invalid_argument when params are unusable for `kind`.
/// Simulation and pricing accept theta = 0 (degenerate deterministic factor);
/// calibration keeps parameters strictly inside positive bounds anyway.
void validate_params(FactorKind kind, const FactorParams& p);

Loadings vasicek_loadings(double t, const FactorParams& p);
Loadings cir_loadings(double t, const FactorParams& p);
Loadings factor_loadings(FactorKind kind, double t, const FactorParams& p);

/// One-step conditional mean/variance of the factor over dt, starting from
/// r_prev. The CIR variance floors r_prev at zero.
ConditionalMoments conditional_moments(FactorKind kind, const FactorParams& p, double r_prev,
                                       double dt);

/// Exact draw from the one-step transition law (Gaussian for Vasicek,
/// noncentral chi-square for CIR). CIR floors r_prev at zero.
double sample_transition(FactorKind kind, const FactorParams& p, double r_prev, double dt,
                         RngStream& rng);

/// Stationary mean and variance, used to initialize the Kalman filter:
/// x0 = eta, P0 = theta^2/(2 kappa) (Vasicek) or eta*theta^2/(2 kappa) (CIR).
ConditionalMoments stationary_init(FactorKind kind, const FactorParams& p);

/// Diagnostic only: 2*kappa*eta > theta^2 keeps a CIR factor away from zero.
/// Never enforced during calibration.
bool feller_condition(const FactorParams& p);

}  // namespace shortrate
