#include "shortrate/sensitivities.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "shortrate/numerics.hpp"

namespace shortrate {

namespace {

constexpr int kKappa = 0;
constexpr int kEta = 1;
constexpr int kTheta = 2;

int symbol_slot(ParamSymbol s) {
    switch (s) {
        case ParamSymbol::Kappa: return kKappa;
        case ParamSymbol::Eta: return kEta;
        default: return kTheta;
    }
}

LoadingGradient vasicek_loading_gradient(const FactorParams& p, double t) {
    const double kappa = p.kappa, eta = p.eta, theta = p.theta;
    const double x = kappa * t;
    const double g = -t * expm1_over(x);                // B(t)
    const double ta = t * one_minus_expm1_over(x);      // t + g(t)
    const double gk = t * t * dexpm1_over(x);           // dg/dkappa
    const double th2 = theta * theta;
    LoadingGradient out;
    out.db[kKappa] = gk;
    out.da[kKappa] = -eta * gk - th2 / (2.0 * kappa) * g * gk +
                     th2 / (4.0 * kappa * kappa) * g * g + th2 / (2.0 * kappa * kappa) * gk -
                     th2 / (kappa * kappa * kappa) * ta;
    out.da[kEta] = -ta;
    out.da[kTheta] = -theta / (2.0 * kappa) * g * g + theta / (kappa * kappa) * ta;
    return out;
}

LoadingHessian vasicek_loading_hessian(const FactorParams& p, double t) {
    const double kappa = p.kappa, eta = p.eta, theta = p.theta;
    const double x = kappa * t;
    const double g = -t * expm1_over(x);
    const double ta = t * one_minus_expm1_over(x);
    const double gk = t * t * dexpm1_over(x);
    const double gkk = t * t * t * d2expm1_over(x);     // d2g/dkappa^2
    const double th2 = theta * theta;
    const double k2 = kappa * kappa, k3 = k2 * kappa, k4 = k3 * kappa;
    LoadingHessian out;
    out.d2b[kKappa][kKappa] = gkk;
    out.d2a[kKappa][kKappa] = -eta * gkk + th2 / (2.0 * k2) * g * gk - th2 / (2.0 * kappa) * gk * gk -
                              th2 / (2.0 * kappa) * g * gkk - th2 / (2.0 * k3) * g * g +
                              th2 / (2.0 * k2) * g * gk - th2 / k3 * gk + th2 / (2.0 * k2) * gkk +
                              3.0 * th2 / k4 * ta - th2 / k3 * gk;
    out.d2a[kKappa][kEta] = out.d2a[kEta][kKappa] = -gk;
    out.d2a[kKappa][kTheta] = out.d2a[kTheta][kKappa] =
        -theta / kappa * g * gk + theta / (2.0 * k2) * g * g + theta / k2 * gk -
        2.0 * theta / k3 * ta;
    out.d2a[kTheta][kTheta] = -g * g / (2.0 * kappa) + ta / k2;
    return out;
}

/// Shared intermediates of the CIR loading derivatives, built around
/// b = sqrt(kappa^2 + 2 theta^2), a = (kappa+b)/(kappa-b), D = a e^{bt} - 1,
/// h = (e^{bt}-1)/D and f = log(2b) + (kappa+b)t/2 - log((kappa-b) D).
struct CirChain {
    double b, kmb, a, E, D;
    double bk, bv, bkk, bkv, bvv;
    double ak, av, akk, akv, avv;
    double f, fk, fv, fkk, fkv, fvv;
    double h, hk, hv, hkk, hkv, hvv;
};

CirChain cir_chain(const FactorParams& p, double t, bool second_order) {
    const double kappa = p.kappa, theta = p.theta;
    CirChain c{};
    c.b = std::sqrt(kappa * kappa + 2.0 * theta * theta);
    const double b = c.b;
    // kappa - b < 0; the difference form cancels badly for small theta
    c.kmb = -2.0 * theta * theta / (kappa + b);
    const double kmb = c.kmb;
    c.a = (kappa + b) / kmb;
    const double a = c.a;
    c.E = std::exp(b * t);
    const double E = c.E;
    c.D = a * E - 1.0;
    const double D = c.D;

    c.bk = kappa / b;
    c.bv = 2.0 * theta / b;
    const double bk = c.bk, bv = c.bv;
    c.ak = 2.0 * (kappa * bk - b) / (kmb * kmb);
    c.av = 2.0 * kappa * bv / (kmb * kmb);
    const double ak = c.ak, av = c.av;

    const double wk = (ak * E + a * t * E * bk) / D;
    const double wv = (av * E + a * t * E * bv) / D;
    c.fk = bk / b - (1.0 - bk) / kmb + (1.0 + bk) * t / 2.0 - wk;
    c.fv = bv / b + bv / kmb + (t / 2.0) * bv - wv;

    // f in the rearranged real-valued form, identical to the loadings path
    const double emb = std::exp(-b * t);
    const double fden = (kappa + b) * (-std::expm1(-b * t)) + 2.0 * b * emb;
    c.f = std::log(2.0 * b) + 0.5 * (kappa - b) * t - std::log(fden);

    c.h = (E - 1.0) / D;
    const double Gk = -t * bk - E * ak + ak + a * t * bk;
    const double Gv = -t * bv - E * av + av + a * t * bv;
    c.hk = E * Gk / (D * D);
    c.hv = E * Gv / (D * D);

    if (!second_order) return c;

    const double b3 = b * b * b;
    c.bkk = 2.0 * theta * theta / b3;
    c.bkv = -2.0 * kappa * theta / b3;
    c.bvv = 2.0 * kappa * kappa / b3;
    const double bkk = c.bkk, bkv = c.bkv, bvv = c.bvv;
    const double kmb3 = kmb * kmb * kmb;
    c.akk = (2.0 * kappa * bkk * kmb - 4.0 * (1.0 - bk) * (kappa * bk - b)) / kmb3;
    c.akv = (2.0 * kappa * bkv * kmb + 2.0 * bv * (2.0 * kappa * bk - b - kappa)) / kmb3;
    c.avv = (2.0 * kappa * bvv * kmb + 4.0 * kappa * bv * bv) / kmb3;
    const double akk = c.akk, akv = c.akv, avv = c.avv;

    const double Nk = ak * E + a * t * E * bk;
    const double Nv = av * E + a * t * E * bv;
    const double wkk =
        (akk * E + 2.0 * ak * t * E * bk + a * t * t * E * bk * bk + a * t * E * bkk) / D -
        Nk * Nk / (D * D);
    const double wkv =
        (akv * E + ak * t * E * bv + av * t * E * bk + a * t * t * E * bk * bv + a * t * E * bkv) /
            D -
        Nk * Nv / (D * D);
    const double wvv =
        (avv * E + 2.0 * av * t * E * bv + a * t * t * E * bv * bv + a * t * E * bvv) / D -
        Nv * Nv / (D * D);

    c.fkk = -bk * bk / (b * b) + bkk / b + (1.0 - bk) * (1.0 - bk) / (kmb * kmb) + bkk / kmb +
            (t / 2.0) * bkk - wkk;
    c.fkv = -bk * bv / (b * b) + bkv / b - (1.0 - bk) * bv / (kmb * kmb) + bkv / kmb +
            (t / 2.0) * bkv - wkv;
    c.fvv = -bv * bv / (b * b) + bvv / b + bv * bv / (kmb * kmb) + bvv / kmb + (t / 2.0) * bvv -
            wvv;

    const double D2 = D * D, D3 = D2 * D;
    c.hkk = t * bk * E * Gk / D2 +
            E * (-t * bkk - t * bk * E * ak - E * akk + akk + ak * t * bk + a * t * bkk) / D2 -
            2.0 * E * Gk * Nk / D3;
    c.hkv = t * bv * E * Gk / D2 +
            E * (-t * bkv - t * bv * E * ak - E * akv + akv + av * t * bk + a * t * bkv) / D2 -
            2.0 * E * Gk * Nv / D3;
    c.hvv = t * bv * E * Gv / D2 +
            E * (-t * bvv - t * bv * E * av - E * avv + avv + av * t * bv + a * t * bvv) / D2 -
            2.0 * E * Gv * Nv / D3;
    return c;
}

LoadingGradient cir_loading_gradient(const FactorParams& p, double t) {
    const double kappa = p.kappa, eta = p.eta, theta = p.theta;
    const CirChain c = cir_chain(p, t, false);
    const double th2 = theta * theta;
    LoadingGradient out;
    out.da[kKappa] = 2.0 * eta / th2 * c.f + 2.0 * kappa * eta / th2 * c.fk;
    out.da[kEta] = 2.0 * kappa / th2 * c.f;
    out.da[kTheta] = -4.0 * kappa * eta / (th2 * theta) * c.f + 2.0 * kappa * eta / th2 * c.fv;
    out.db[kKappa] = 2.0 * c.h / (c.kmb * c.kmb) * (1.0 - c.bk) - 2.0 / c.kmb * c.hk;
    out.db[kTheta] = -2.0 * c.h / (c.kmb * c.kmb) * c.bv - 2.0 / c.kmb * c.hv;
    return out;
}

LoadingHessian cir_loading_hessian(const FactorParams& p, double t) {
    const double kappa = p.kappa, eta = p.eta, theta = p.theta;
    const CirChain c = cir_chain(p, t, true);
    const double th2 = theta * theta, th3 = th2 * theta, th4 = th2 * th2;
    LoadingHessian out;
    out.d2a[kKappa][kKappa] = 4.0 * eta / th2 * c.fk + 2.0 * kappa * eta / th2 * c.fkk;
    out.d2a[kKappa][kTheta] = out.d2a[kTheta][kKappa] =
        -4.0 * eta / th3 * c.f + 2.0 * eta / th2 * c.fv - 4.0 * kappa * eta / th3 * c.fk +
        2.0 * kappa * eta / th2 * c.fkv;
    out.d2a[kTheta][kTheta] =
        12.0 * kappa * eta / th4 * c.f - 8.0 * kappa * eta / th3 * c.fv +
        2.0 * kappa * eta / th2 * c.fvv;
    // A is linear in eta, so the eta row is the eta-slope's own gradient
    out.d2a[kKappa][kEta] = out.d2a[kEta][kKappa] = 2.0 / th2 * c.f + 2.0 * kappa / th2 * c.fk;
    out.d2a[kEta][kTheta] = out.d2a[kTheta][kEta] =
        -4.0 * kappa / th3 * c.f + 2.0 * kappa / th2 * c.fv;

    const double kmb = c.kmb, kmb2 = kmb * kmb, kmb3 = kmb2 * kmb;
    out.d2b[kKappa][kKappa] = c.hk * 2.0 / kmb2 * (1.0 - c.bk) -
                              4.0 * c.h / kmb3 * (1.0 - c.bk) * (1.0 - c.bk) -
                              2.0 * c.h / kmb2 * c.bkk + 2.0 / kmb2 * c.hk * (1.0 - c.bk) -
                              2.0 / kmb * c.hkk;
    out.d2b[kKappa][kTheta] = out.d2b[kTheta][kKappa] =
        c.hv * 2.0 / kmb2 * (1.0 - c.bk) + 4.0 * c.h / kmb3 * (1.0 - c.bk) * c.bv -
        2.0 * c.h / kmb2 * c.bkv - 2.0 / kmb2 * c.hk * c.bv - 2.0 / kmb * c.hkv;
    out.d2b[kTheta][kTheta] = -c.hv * 2.0 / kmb2 * c.bv - 4.0 * c.h / kmb3 * c.bv * c.bv -
                              2.0 * c.h / kmb2 * c.bvv - 2.0 / kmb2 * c.hv * c.bv -
                              2.0 / kmb * c.hvv;
    return out;
}

}  // namespace

LoadingGradient loading_gradient(FactorKind kind, const FactorParams& p, double t) {
    if (!std::isfinite(t) || t < 0.0) throw std::invalid_argument("maturity must be >= 0");
    validate_params(kind, p);
    return kind == FactorKind::Vasicek ? vasicek_loading_gradient(p, t)
                                       : cir_loading_gradient(p, t);
}

LoadingHessian loading_hessian(FactorKind kind, const FactorParams& p, double t) {
    if (!std::isfinite(t) || t < 0.0) throw std::invalid_argument("maturity must be >= 0");
    validate_params(kind, p);
    return kind == FactorKind::Vasicek ? vasicek_loading_hessian(p, t)
                                       : cir_loading_hessian(p, t);
}

void qnoise_derivatives(FactorKind kind, const FactorParams& p, double dt, double x_prev,
                        const ParamLayout& layout, int factor_index,
                        const Eigen::VectorXd& dx_prev, Eigen::VectorXd& dq,
                        const Eigen::MatrixXd* d2x_prev, Eigen::MatrixXd* d2q) {
    const int np = layout.size();
    if (dx_prev.size() != np) throw std::invalid_argument("dx_prev size mismatch");
    dq.setZero(np);
    if (d2q) d2q->setZero(np, np);

    const double kappa = p.kappa, eta = p.eta, theta = p.theta;
    const int ik = layout.index_of(factor_index, ParamSymbol::Kappa);
    const int ie = layout.index_of(factor_index, ParamSymbol::Eta);
    const int it = layout.index_of(factor_index, ParamSymbol::Theta);

    if (kind == FactorKind::Vasicek) {
        const double E2 = std::exp(-2.0 * kappa * dt);
        const double mE2 = -std::expm1(-2.0 * kappa * dt);  // 1 - e^{-2k dt}
        if (ik >= 0)
            dq(ik) = -theta * theta / (2.0 * kappa * kappa) * mE2 +
                     theta * theta * dt / kappa * E2;
        if (it >= 0) dq(it) = theta / kappa * mE2;
        if (d2q) {
            Eigen::MatrixXd& h = *d2q;
            if (ik >= 0)
                h(ik, ik) = theta * theta / (kappa * kappa * kappa) * mE2 -
                            2.0 * theta * theta * dt / (kappa * kappa) * E2 -
                            2.0 * theta * theta * dt * dt / kappa * E2;
            if (ik >= 0 && it >= 0)
                h(ik, it) = h(it, ik) =
                    -theta / (kappa * kappa) * mE2 + 2.0 * theta * dt / kappa * E2;
            if (it >= 0) h(it, it) = mE2 / kappa;
        }
        return;
    }

    // CIR: Q = q_c1 + max(r_{t-1}, 0) q_c2, the r-chain flows through every
    // free parameter via the filtered-state sensitivities
    const double E = std::exp(-kappa * dt);
    const double mE = -std::expm1(-kappa * dt);  // 1 - e^{-k dt}
    const double EmE2 = E * mE;                  // e^{-k dt} - e^{-2k dt}
    const double E_2E2 = E - 2.0 * E * E;
    const double th2 = theta * theta;
    const double qc2 = th2 / kappa * EmE2;
    const bool ind = x_prev > 0.0;
    const double rp = ind ? x_prev : 0.0;

    Eigen::VectorXd dqc1 = Eigen::VectorXd::Zero(np);
    Eigen::VectorXd dqc2 = Eigen::VectorXd::Zero(np);
    if (ik >= 0) {
        dqc1(ik) = -th2 * eta / (2.0 * kappa * kappa) * mE * mE + th2 * eta * dt / kappa * EmE2;
        dqc2(ik) = -th2 / (kappa * kappa) * EmE2 - th2 * dt / kappa * E_2E2;
    }
    if (ie >= 0) dqc1(ie) = th2 / (2.0 * kappa) * mE * mE;
    if (it >= 0) {
        dqc1(it) = theta * eta / kappa * mE * mE;
        dqc2(it) = 2.0 * theta / kappa * EmE2;
    }
    dq = dqc1 + rp * dqc2;
    if (ind) dq += qc2 * dx_prev;

    if (!d2q) return;
    Eigen::MatrixXd d2qc1 = Eigen::MatrixXd::Zero(np, np);
    Eigen::MatrixXd d2qc2 = Eigen::MatrixXd::Zero(np, np);
    if (ik >= 0) {
        d2qc1(ik, ik) = th2 * eta / (kappa * kappa * kappa) * mE * mE -
                        2.0 * th2 * eta * dt / (kappa * kappa) * EmE2 -
                        th2 * eta * dt * dt / kappa * E_2E2;
        d2qc2(ik, ik) = 2.0 * th2 / (kappa * kappa * kappa) * EmE2 +
                        2.0 * th2 * dt / (kappa * kappa) * E_2E2 +
                        th2 * dt * dt / kappa * (E - 4.0 * E * E);
    }
    if (ik >= 0 && ie >= 0)
        d2qc1(ik, ie) = d2qc1(ie, ik) =
            -th2 / (2.0 * kappa * kappa) * mE * mE + th2 * dt / kappa * EmE2;
    if (ik >= 0 && it >= 0) {
        d2qc1(ik, it) = d2qc1(it, ik) =
            -theta * eta / (kappa * kappa) * mE * mE + 2.0 * theta * eta * dt / kappa * EmE2;
        d2qc2(ik, it) = d2qc2(it, ik) =
            -2.0 * theta / (kappa * kappa) * EmE2 - 2.0 * theta * dt / kappa * E_2E2;
    }
    if (ie >= 0 && it >= 0)
        d2qc1(ie, it) = d2qc1(it, ie) = theta / kappa * mE * mE;
    if (it >= 0) {
        d2qc1(it, it) = eta / kappa * mE * mE;
        d2qc2(it, it) = 2.0 / kappa * EmE2;
    }
    *d2q = d2qc1 + rp * d2qc2;
    if (ind) {
        *d2q += dx_prev * dqc2.transpose() + dqc2 * dx_prev.transpose();
        if (d2x_prev) *d2q += qc2 * (*d2x_prev);
    }
}

namespace {

/// Time-invariant derivative data for one free parameter.
struct ParamStatics {
    Eigen::VectorXd dphi0, dphi1;  // d, diagonal entries
    Eigen::MatrixXd dh1;           // n x d
    Eigen::VectorXd dh0e;          // n, (dH0/dxi) e
    double dsigma2 = 0.0;          // d(sigma_eps^2)/dxi
    Eigen::VectorXd dx0;           // d
    Eigen::VectorXd dp0;           // d, diagonal entries
};

/// Same for an ordered parameter pair.
struct PairStatics {
    Eigen::VectorXd d2phi0, d2phi1;
    Eigen::MatrixXd d2h1;
    Eigen::VectorXd d2h0e;
    double d2sigma2 = 0.0;
    Eigen::VectorXd d2p0;
};

struct GatherView {
    Eigen::MatrixXd h1;      // nr x d
    Eigen::VectorXd h0e;     // nr
    Eigen::VectorXd z;       // nr
};

}  // namespace

SensitivityResult loglik_sensitivities(const ModelSpec& spec, const YieldPanel& panel,
                                       const SensitivityOptions& options) {
    spec.validate();
    panel.validate();
    if (spec.maturities != panel.maturities)
        throw std::invalid_argument("panel maturities do not match model maturities");

    const int d = spec.dimension();
    const int n = spec.n_maturities();
    const ParamLayout layout = ParamLayout::for_spec(spec);
    const int np = layout.size();
    const bool hess = options.want_hessian;
    const int npairs = hess ? np * np : 0;

    const StateSpaceMatrices ss = build_state_space(spec);
    const Eigen::VectorXd h0e_full = ss.h0.rowwise().sum();

    // loading derivative tables, one entry per (factor, maturity)
    std::vector<std::vector<LoadingGradient>> lg(static_cast<std::size_t>(d));
    std::vector<std::vector<LoadingHessian>> lh(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        const auto& f = spec.factors[static_cast<std::size_t>(i)];
        lg[static_cast<std::size_t>(i)].reserve(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            lg[static_cast<std::size_t>(i)].push_back(
                loading_gradient(f.kind, f.params, spec.maturities[static_cast<std::size_t>(j)]));
            if (hess)
                lh[static_cast<std::size_t>(i)].push_back(loading_hessian(
                    f.kind, f.params, spec.maturities[static_cast<std::size_t>(j)]));
        }
    }

    std::vector<ParamStatics> stat(static_cast<std::size_t>(np));
    for (int k = 0; k < np; ++k) {
        ParamStatics& s = stat[static_cast<std::size_t>(k)];
        s.dphi0 = Eigen::VectorXd::Zero(d);
        s.dphi1 = Eigen::VectorXd::Zero(d);
        s.dh1 = Eigen::MatrixXd::Zero(n, d);
        s.dh0e = Eigen::VectorXd::Zero(n);
        s.dx0 = Eigen::VectorXd::Zero(d);
        s.dp0 = Eigen::VectorXd::Zero(d);
        const ParamRef& r = layout.ref(k);
        if (r.symbol == ParamSymbol::SigmaEps) {
            s.dsigma2 = 2.0 * spec.sigma_eps;
            continue;
        }
        const int i = r.factor;
        const auto& f = spec.factors[static_cast<std::size_t>(i)];
        const double kappa = f.params.kappa, eta = f.params.eta, theta = f.params.theta;
        const double E = std::exp(-kappa * spec.dt);
        const bool vas = f.kind == FactorKind::Vasicek;
        switch (r.symbol) {
            case ParamSymbol::Kappa:
                s.dphi0(i) = eta * spec.dt * E;
                s.dphi1(i) = -spec.dt * E;
                s.dp0(i) = vas ? -theta * theta / (2.0 * kappa * kappa)
                               : -eta * theta * theta / (2.0 * kappa * kappa);
                break;
            case ParamSymbol::Eta:
                s.dphi0(i) = -std::expm1(-kappa * spec.dt);
                s.dx0(i) = 1.0;
                s.dp0(i) = vas ? 0.0 : theta * theta / (2.0 * kappa);
                break;
            default:
                s.dp0(i) = vas ? theta / kappa : eta * theta / kappa;
                break;
        }
        const int slot = symbol_slot(r.symbol);
        for (int j = 0; j < n; ++j) {
            const double T = spec.maturities[static_cast<std::size_t>(j)];
            s.dh0e(j) = -lg[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                             .da[static_cast<std::size_t>(slot)] /
                        T;
            s.dh1(j, i) = -lg[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                               .db[static_cast<std::size_t>(slot)] /
                          T;
        }
    }

    std::vector<PairStatics> pstat(static_cast<std::size_t>(npairs));
    if (hess) {
        for (int k1 = 0; k1 < np; ++k1)
            for (int k2 = 0; k2 < np; ++k2) {
                PairStatics& s = pstat[static_cast<std::size_t>(k1 * np + k2)];
                s.d2phi0 = Eigen::VectorXd::Zero(d);
                s.d2phi1 = Eigen::VectorXd::Zero(d);
                s.d2h1 = Eigen::MatrixXd::Zero(n, d);
                s.d2h0e = Eigen::VectorXd::Zero(n);
                s.d2p0 = Eigen::VectorXd::Zero(d);
                const ParamRef& r1 = layout.ref(k1);
                const ParamRef& r2 = layout.ref(k2);
                if (r1.symbol == ParamSymbol::SigmaEps && r2.symbol == ParamSymbol::SigmaEps) {
                    s.d2sigma2 = 2.0;
                    continue;
                }
                if (r1.factor < 0 || r1.factor != r2.factor) continue;  // cross terms vanish
                const int i = r1.factor;
                const auto& f = spec.factors[static_cast<std::size_t>(i)];
                const double kappa = f.params.kappa, eta = f.params.eta, theta = f.params.theta;
                const double E = std::exp(-kappa * spec.dt);
                const bool vas = f.kind == FactorKind::Vasicek;
                const int s1 = symbol_slot(r1.symbol), s2 = symbol_slot(r2.symbol);
                if (s1 == kKappa && s2 == kKappa) {
                    s.d2phi0(i) = -eta * spec.dt * spec.dt * E;
                    s.d2phi1(i) = spec.dt * spec.dt * E;
                    s.d2p0(i) = vas ? theta * theta / (kappa * kappa * kappa)
                                    : eta * theta * theta / (kappa * kappa * kappa);
                } else if ((s1 == kKappa && s2 == kEta) || (s1 == kEta && s2 == kKappa)) {
                    s.d2phi0(i) = spec.dt * E;
                    s.d2p0(i) = vas ? 0.0 : -theta * theta / (2.0 * kappa * kappa);
                } else if ((s1 == kKappa && s2 == kTheta) || (s1 == kTheta && s2 == kKappa)) {
                    s.d2p0(i) = vas ? -theta / (kappa * kappa) : -eta * theta / (kappa * kappa);
                } else if ((s1 == kEta && s2 == kTheta) || (s1 == kTheta && s2 == kEta)) {
                    s.d2p0(i) = vas ? 0.0 : theta / kappa;
                } else if (s1 == kTheta && s2 == kTheta) {
                    s.d2p0(i) = vas ? 1.0 / kappa : eta / kappa;
                }
                for (int j = 0; j < n; ++j) {
                    const double T = spec.maturities[static_cast<std::size_t>(j)];
                    const auto& lhj = lh[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                    s.d2h0e(j) = -lhj.d2a[static_cast<std::size_t>(s1)][static_cast<std::size_t>(s2)] / T;
                    s.d2h1(j, i) =
                        -lhj.d2b[static_cast<std::size_t>(s1)][static_cast<std::size_t>(s2)] / T;
                }
            }
    }

    // running state and its sensitivities
    Eigen::VectorXd x(d), p0(d);
    for (int i = 0; i < d; ++i) {
        const auto m = stationary_init(spec.factors[static_cast<std::size_t>(i)].kind,
                                       spec.factors[static_cast<std::size_t>(i)].params);
        x(i) = m.mean;
        p0(i) = m.variance;
    }
    Eigen::MatrixXd P = p0.asDiagonal();

    std::vector<Eigen::VectorXd> dx(static_cast<std::size_t>(np));
    std::vector<Eigen::MatrixXd> dP(static_cast<std::size_t>(np));
    for (int k = 0; k < np; ++k) {
        dx[static_cast<std::size_t>(k)] = stat[static_cast<std::size_t>(k)].dx0;
        dP[static_cast<std::size_t>(k)] = stat[static_cast<std::size_t>(k)].dp0.asDiagonal();
        if (options.zero_initial_conditions) {
            dx[static_cast<std::size_t>(k)].setZero();
            dP[static_cast<std::size_t>(k)].setZero();
        }
    }
    std::vector<Eigen::VectorXd> d2x(static_cast<std::size_t>(npairs));
    std::vector<Eigen::MatrixXd> d2P(static_cast<std::size_t>(npairs));
    for (int q = 0; q < npairs; ++q) {
        d2x[static_cast<std::size_t>(q)] = Eigen::VectorXd::Zero(d);
        d2P[static_cast<std::size_t>(q)] = pstat[static_cast<std::size_t>(q)].d2p0.asDiagonal();
        if (options.zero_initial_conditions) d2P[static_cast<std::size_t>(q)].setZero();
    }

    // per-step parameter temporaries
    std::vector<Eigen::VectorXd> dxm(static_cast<std::size_t>(np)), du(static_cast<std::size_t>(np));
    std::vector<Eigen::MatrixXd> dPm(static_cast<std::size_t>(np)),
        dPzz(static_cast<std::size_t>(np)), dK(static_cast<std::size_t>(np));

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(np);
    Eigen::MatrixXd hraw = Eigen::MatrixXd::Zero(np, np);
    double loglik = 0.0;
    const double log2pi = std::log(2.0 * std::numbers::pi);
    const bool par = options.parallel;

    // dQ(i, k) = d(Q_ii)/d(theta_k); per-factor pair blocks for the Hessian
    Eigen::MatrixXd dQ(d, np);
    std::vector<Eigen::MatrixXd> d2Q(static_cast<std::size_t>(hess ? d : 0));

    for (int t = 0; t < panel.n_days(); ++t) {
        // --- process noise and its chain through the previous filtered state
        Eigen::VectorXd qdiag(d);
        for (int i = 0; i < d; ++i) {
            const auto& f = spec.factors[static_cast<std::size_t>(i)];
            qdiag(i) = conditional_moments(f.kind, f.params, x(i), spec.dt).variance;
            Eigen::VectorXd dxp(np);
            for (int k = 0; k < np; ++k) dxp(k) = dx[static_cast<std::size_t>(k)](i);
            Eigen::VectorXd dqi;
            if (hess) {
                Eigen::MatrixXd d2xp(np, np);
                for (int k1 = 0; k1 < np; ++k1)
                    for (int k2 = 0; k2 < np; ++k2)
                        d2xp(k1, k2) = d2x[static_cast<std::size_t>(k1 * np + k2)](i);
                Eigen::MatrixXd d2qi;
                qnoise_derivatives(f.kind, f.params, spec.dt, x(i), layout, i, dxp, dqi, &d2xp,
                                   &d2qi);
                d2Q[static_cast<std::size_t>(i)] = d2qi;
            } else {
                qnoise_derivatives(f.kind, f.params, spec.dt, x(i), layout, i, dxp, dqi);
            }
            dQ.row(i) = dqi.transpose();
        }

        // --- prediction
        const Eigen::VectorXd xm = ss.phi0 + ss.phi1.cwiseProduct(x);
        Eigen::MatrixXd Pm = ss.phi1.asDiagonal() * P * ss.phi1.asDiagonal();
        Pm += Eigen::MatrixXd(qdiag.asDiagonal());

#pragma omp parallel for schedule(static) if (par)
        for (int k = 0; k < np; ++k) {
            const ParamStatics& s = stat[static_cast<std::size_t>(k)];
            dxm[static_cast<std::size_t>(k)] =
                s.dphi0 + s.dphi1.cwiseProduct(x) + ss.phi1.cwiseProduct(dx[static_cast<std::size_t>(k)]);
            Eigen::MatrixXd m = s.dphi1.asDiagonal() * P * ss.phi1.asDiagonal();
            m += ss.phi1.asDiagonal() * dP[static_cast<std::size_t>(k)] * ss.phi1.asDiagonal();
            m += ss.phi1.asDiagonal() * P * s.dphi1.asDiagonal();
            m += Eigen::MatrixXd(Eigen::VectorXd(dQ.col(k)).asDiagonal());
            dPm[static_cast<std::size_t>(k)] = m;
        }

        std::vector<Eigen::VectorXd> d2xm(static_cast<std::size_t>(npairs));
        std::vector<Eigen::MatrixXd> d2Pm(static_cast<std::size_t>(npairs));
        if (hess) {
#pragma omp parallel for schedule(static) if (par)
            for (int q = 0; q < npairs; ++q) {
                const int k1 = q / np, k2 = q % np;
                const PairStatics& s2 = pstat[static_cast<std::size_t>(q)];
                const ParamStatics& a1 = stat[static_cast<std::size_t>(k1)];
                const ParamStatics& a2 = stat[static_cast<std::size_t>(k2)];
                d2xm[static_cast<std::size_t>(q)] =
                    s2.d2phi0 + s2.d2phi1.cwiseProduct(x) +
                    a1.dphi1.cwiseProduct(dx[static_cast<std::size_t>(k2)]) +
                    a2.dphi1.cwiseProduct(dx[static_cast<std::size_t>(k1)]) +
                    ss.phi1.cwiseProduct(d2x[static_cast<std::size_t>(q)]);
                Eigen::MatrixXd m = s2.d2phi1.asDiagonal() * P * ss.phi1.asDiagonal();
                m += a1.dphi1.asDiagonal() * dP[static_cast<std::size_t>(k2)] * ss.phi1.asDiagonal();
                m += a1.dphi1.asDiagonal() * P * a2.dphi1.asDiagonal();
                m += a2.dphi1.asDiagonal() * dP[static_cast<std::size_t>(k1)] * ss.phi1.asDiagonal();
                m += ss.phi1.asDiagonal() * d2P[static_cast<std::size_t>(q)] * ss.phi1.asDiagonal();
                m += ss.phi1.asDiagonal() * dP[static_cast<std::size_t>(k1)] * a2.dphi1.asDiagonal();
                m += a2.dphi1.asDiagonal() * P * a1.dphi1.asDiagonal();
                m += ss.phi1.asDiagonal() * dP[static_cast<std::size_t>(k2)] * a1.dphi1.asDiagonal();
                m += ss.phi1.asDiagonal() * P * s2.d2phi1.asDiagonal();
                Eigen::VectorXd d2qcol(d);
                for (int i = 0; i < d; ++i) d2qcol(i) = d2Q[static_cast<std::size_t>(i)](k1, k2);
                m += Eigen::MatrixXd(d2qcol.asDiagonal());
                d2Pm[static_cast<std::size_t>(q)] = m;
            }
        }

        // --- observed rows for the day
        std::vector<int> obs;
        obs.reserve(static_cast<std::size_t>(n));
        for (int c = 0; c < n; ++c)
            if (!std::isnan(panel.yields(t, c))) obs.push_back(c);
        const int nr = static_cast<int>(obs.size());

        if (nr == 0) {  // no observations: prediction carries through
            x = xm;
            P = Pm;
            for (int k = 0; k < np; ++k) {
                dx[static_cast<std::size_t>(k)] = dxm[static_cast<std::size_t>(k)];
                dP[static_cast<std::size_t>(k)] = dPm[static_cast<std::size_t>(k)];
            }
            for (int q = 0; q < npairs; ++q) {
                d2x[static_cast<std::size_t>(q)] = d2xm[static_cast<std::size_t>(q)];
                d2P[static_cast<std::size_t>(q)] = d2Pm[static_cast<std::size_t>(q)];
            }
            continue;
        }

        const bool full = nr == n;
        GatherView gv;
        gv.h1.resize(nr, d);
        gv.h0e.resize(nr);
        gv.z.resize(nr);
        for (int r = 0; r < nr; ++r) {
            const int c = obs[static_cast<std::size_t>(r)];
            gv.h1.row(r) = ss.h1.row(c);
            gv.h0e(r) = h0e_full(c);
            gv.z(r) = panel.yields(t, c);
        }

        const Eigen::VectorXd u = gv.z - gv.h0e - gv.h1 * xm;
        Eigen::MatrixXd Pzz = gv.h1 * Pm * gv.h1.transpose();
        Pzz.diagonal().array() += ss.sigma_eps2;
        const Eigen::LLT<Eigen::MatrixXd> llt(Pzz);
        if (llt.info() != Eigen::Success)
            throw FilterDegenerate(panel.dates[static_cast<std::size_t>(t)],
                                   "innovation covariance not positive definite");
        const Eigen::MatrixXd Pzzinv =
            llt.solve(Eigen::MatrixXd::Identity(nr, nr));
        const Eigen::MatrixXd lmat = llt.matrixL();
        double logdet = 0.0;
        for (int r = 0; r < nr; ++r) logdet += 2.0 * std::log(lmat(r, r));
        const Eigen::VectorXd w = llt.solve(u);
        loglik += -0.5 * nr * log2pi - 0.5 * logdet - 0.5 * u.dot(w);
        if (!std::isfinite(loglik))
            throw FilterDegenerate(panel.dates[static_cast<std::size_t>(t)],
                                   "log-likelihood is not finite");

        const Eigen::MatrixXd K = Pm * gv.h1.transpose() * Pzzinv;

        // --- first-order recursion and gradient accumulation
#pragma omp parallel for schedule(static) if (par)
        for (int k = 0; k < np; ++k) {
            const ParamStatics& s = stat[static_cast<std::size_t>(k)];
            Eigen::MatrixXd dh1r;
            Eigen::VectorXd dh0er;
            if (full) {
                dh1r = s.dh1;
                dh0er = s.dh0e;
            } else {
                dh1r.resize(nr, d);
                dh0er.resize(nr);
                for (int r = 0; r < nr; ++r) {
                    const int c = obs[static_cast<std::size_t>(r)];
                    dh1r.row(r) = s.dh1.row(c);
                    dh0er(r) = s.dh0e(c);
                }
            }
            du[static_cast<std::size_t>(k)] =
                -dh0er - dh1r * xm - gv.h1 * dxm[static_cast<std::size_t>(k)];
            Eigen::MatrixXd dpzz = dh1r * Pm * gv.h1.transpose();
            dpzz += gv.h1 * dPm[static_cast<std::size_t>(k)] * gv.h1.transpose();
            dpzz += gv.h1 * Pm * dh1r.transpose();
            dpzz.diagonal().array() += s.dsigma2;
            dPzz[static_cast<std::size_t>(k)] = dpzz;
            dK[static_cast<std::size_t>(k)] =
                dPm[static_cast<std::size_t>(k)] * gv.h1.transpose() * Pzzinv +
                Pm * dh1r.transpose() * Pzzinv - K * dpzz * Pzzinv;
            // new filtered sensitivities (written after all reads of dx/dP
            // for this k; other parameters never read them)
            const Eigen::VectorXd dxn = dxm[static_cast<std::size_t>(k)] +
                                        dK[static_cast<std::size_t>(k)] * u +
                                        K * du[static_cast<std::size_t>(k)];
            const Eigen::MatrixXd dpn =
                dPm[static_cast<std::size_t>(k)] - dK[static_cast<std::size_t>(k)] * gv.h1 * Pm -
                K * dh1r * Pm - K * gv.h1 * dPm[static_cast<std::size_t>(k)];
            grad(k) += -0.5 * (2.0 * w.dot(du[static_cast<std::size_t>(k)]) +
                               Pzzinv.cwiseProduct(dpzz).sum() - w.dot(dpzz * w));
            dx[static_cast<std::size_t>(k)] = dxn;
            dP[static_cast<std::size_t>(k)] = dpn;
        }

        // --- second-order recursion and Hessian accumulation
        if (hess) {
            std::vector<Eigen::MatrixXd> dh1r_all(static_cast<std::size_t>(np));
            if (!full) {
                for (int k = 0; k < np; ++k) {
                    Eigen::MatrixXd m(nr, d);
                    for (int r = 0; r < nr; ++r)
                        m.row(r) = stat[static_cast<std::size_t>(k)].dh1.row(
                            obs[static_cast<std::size_t>(r)]);
                    dh1r_all[static_cast<std::size_t>(k)] = m;
                }
            }
            auto dh1_of = [&](int k) -> const Eigen::MatrixXd& {
                return full ? stat[static_cast<std::size_t>(k)].dh1
                            : dh1r_all[static_cast<std::size_t>(k)];
            };

#pragma omp parallel for schedule(static) if (par)
            for (int q = 0; q < npairs; ++q) {
                const int k1 = q / np, k2 = q % np;
                const PairStatics& s2 = pstat[static_cast<std::size_t>(q)];
                Eigen::MatrixXd d2h1r;
                Eigen::VectorXd d2h0er;
                if (full) {
                    d2h1r = s2.d2h1;
                    d2h0er = s2.d2h0e;
                } else {
                    d2h1r.resize(nr, d);
                    d2h0er.resize(nr);
                    for (int r = 0; r < nr; ++r) {
                        const int c = obs[static_cast<std::size_t>(r)];
                        d2h1r.row(r) = s2.d2h1.row(c);
                        d2h0er(r) = s2.d2h0e(c);
                    }
                }
                const Eigen::MatrixXd& dh1r1 = dh1_of(k1);
                const Eigen::MatrixXd& dh1r2 = dh1_of(k2);
                const Eigen::VectorXd& du1 = du[static_cast<std::size_t>(k1)];
                const Eigen::VectorXd& du2 = du[static_cast<std::size_t>(k2)];
                const Eigen::MatrixXd& dpzz1 = dPzz[static_cast<std::size_t>(k1)];
                const Eigen::MatrixXd& dpzz2 = dPzz[static_cast<std::size_t>(k2)];
                const Eigen::MatrixXd& dPm1 = dPm[static_cast<std::size_t>(k1)];
                const Eigen::MatrixXd& dPm2 = dPm[static_cast<std::size_t>(k2)];

                const Eigen::VectorXd d2u = -d2h0er - d2h1r * xm - dh1r1 * dxm[static_cast<std::size_t>(k2)] -
                                            dh1r2 * dxm[static_cast<std::size_t>(k1)] -
                                            gv.h1 * d2xm[static_cast<std::size_t>(q)];
                Eigen::MatrixXd d2pzz = d2h1r * Pm * gv.h1.transpose();
                d2pzz += dh1r1 * dPm2 * gv.h1.transpose();
                d2pzz += dh1r1 * Pm * dh1r2.transpose();
                d2pzz += dh1r2 * dPm1 * gv.h1.transpose();
                d2pzz += gv.h1 * d2Pm[static_cast<std::size_t>(q)] * gv.h1.transpose();
                d2pzz += gv.h1 * dPm1 * dh1r2.transpose();
                d2pzz += dh1r2 * Pm * dh1r1.transpose();
                d2pzz += gv.h1 * dPm2 * dh1r1.transpose();
                d2pzz += gv.h1 * Pm * d2h1r.transpose();
                d2pzz.diagonal().array() += s2.d2sigma2;

                const Eigen::MatrixXd pinv_dpzz1 = Pzzinv * dpzz1;
                const Eigen::MatrixXd pinv_dpzz2 = Pzzinv * dpzz2;
                const Eigen::MatrixXd dPzzinv1 = -pinv_dpzz1 * Pzzinv;
                const Eigen::MatrixXd dPzzinv2 = -pinv_dpzz2 * Pzzinv;
                // d/dxi2 of (Pzz^{-1} dPzz/dxi1 Pzz^{-1})
                const Eigen::MatrixXd W12 = -pinv_dpzz2 * pinv_dpzz1 * Pzzinv -
                                            pinv_dpzz1 * pinv_dpzz2 * Pzzinv +
                                            Pzzinv * d2pzz * Pzzinv;

                const Eigen::MatrixXd d2K =
                    d2Pm[static_cast<std::size_t>(q)] * gv.h1.transpose() * Pzzinv +
                    dPm1 * dh1r2.transpose() * Pzzinv + dPm1 * gv.h1.transpose() * dPzzinv2 +
                    dPm2 * dh1r1.transpose() * Pzzinv + Pm * d2h1r.transpose() * Pzzinv +
                    Pm * dh1r1.transpose() * dPzzinv2 + dPm2 * gv.h1.transpose() * dPzzinv1 +
                    Pm * dh1r2.transpose() * dPzzinv1 - Pm * gv.h1.transpose() * W12;

                const Eigen::VectorXd d2xn =
                    d2xm[static_cast<std::size_t>(q)] + d2K * u +
                    dK[static_cast<std::size_t>(k1)] * du2 + dK[static_cast<std::size_t>(k2)] * du1 +
                    K * d2u;
                const Eigen::MatrixXd d2pn =
                    d2Pm[static_cast<std::size_t>(q)] - d2K * gv.h1 * Pm -
                    dK[static_cast<std::size_t>(k1)] * dh1r2 * Pm -
                    dK[static_cast<std::size_t>(k1)] * gv.h1 * dPm2 -
                    dK[static_cast<std::size_t>(k2)] * dh1r1 * Pm - K * d2h1r * Pm -
                    K * dh1r1 * dPm2 - dK[static_cast<std::size_t>(k2)] * gv.h1 * dPm1 -
                    K * dh1r2 * dPm1 - K * gv.h1 * d2Pm[static_cast<std::size_t>(q)];

                const double term = 2.0 * w.dot(d2u) - 2.0 * w.dot(dpzz2 * (Pzzinv * du1)) +
                                    2.0 * du1.dot(Pzzinv * du2) -
                                    (Pzzinv * dpzz2 * Pzzinv).cwiseProduct(dpzz1).sum() +
                                    Pzzinv.cwiseProduct(d2pzz).sum() -
                                    2.0 * w.dot(dpzz1 * (Pzzinv * du2)) +
                                    w.dot(dpzz2 * (Pzzinv * (dpzz1 * w))) +
                                    w.dot(dpzz1 * (Pzzinv * (dpzz2 * w))) - w.dot(d2pzz * w);
                hraw(k1, k2) += -0.5 * term;
                d2x[static_cast<std::size_t>(q)] = d2xn;
                d2P[static_cast<std::size_t>(q)] = d2pn;
            }
        }

        // --- base filtered update
        x = xm + K * u;
        P = Pm - K * gv.h1 * Pm;
        if (!x.allFinite() || !P.allFinite())
            throw FilterDegenerate(panel.dates[static_cast<std::size_t>(t)],
                                   "filtered state is not finite");
    }

    SensitivityResult res;
    res.loglik = loglik;
    res.gradient = grad;
    if (hess) {
        res.hessian_asymmetry = (hraw - hraw.transpose()).cwiseAbs().maxCoeff();
        res.hessian = 0.5 * (hraw + hraw.transpose());
    }
    return res;
}

Eigen::VectorXd loglik_gradient(const ModelSpec& spec, const YieldPanel& panel) {
    return loglik_sensitivities(spec, panel).gradient;
}

SensitivityResult loglik_hessian(const ModelSpec& spec, const YieldPanel& panel) {
    SensitivityOptions opt;
    opt.want_hessian = true;
    return loglik_sensitivities(spec, panel, opt);
}

}  // namespace shortrate
