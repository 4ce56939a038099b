#include "support/oracles.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "shortrate/rng.hpp"

namespace oracles {

namespace {

std::vector<McEstimate> mc_price(const shortrate::FactorParams& p, double r0,
                                 const std::vector<double>& maturities, int paths,
                                 int steps_per_year, std::uint64_t seed, bool cir) {
    const int nm = static_cast<int>(maturities.size());
    std::vector<long> checkpoint(static_cast<std::size_t>(nm));
    for (int j = 0; j < nm; ++j) {
        const double exact = maturities[static_cast<std::size_t>(j)] * steps_per_year;
        checkpoint[static_cast<std::size_t>(j)] = std::lround(exact);
        if (std::abs(exact - static_cast<double>(checkpoint[static_cast<std::size_t>(j)])) > 1e-9)
            throw std::invalid_argument("maturity off the Monte Carlo step grid");
    }
    const long total = checkpoint.back();
    const double dt = 1.0 / steps_per_year;
    const double sq_dt = std::sqrt(dt);

    std::vector<double> disc(static_cast<std::size_t>(paths) * static_cast<std::size_t>(nm));
#pragma omp parallel for schedule(static)
    for (int path = 0; path < paths; ++path) {
        shortrate::RngStream rng(seed, static_cast<std::uint64_t>(path));
        double r = r0;
        double integral = 0.0;
        int next = 0;
        for (long s = 1; s <= total; ++s) {
            const double rp = cir ? (r > 0.0 ? r : 0.0) : r;
            const double diffusion = cir ? p.theta * std::sqrt(rp) : p.theta;
            const double r_new = r + p.kappa * (p.eta - rp) * dt + diffusion * sq_dt * rng.normal();
            const double rp_new = cir ? (r_new > 0.0 ? r_new : 0.0) : r_new;
            integral += 0.5 * (rp + rp_new) * dt;
            r = r_new;
            while (next < nm && checkpoint[static_cast<std::size_t>(next)] == s) {
                disc[static_cast<std::size_t>(path) * nm + next] = std::exp(-integral);
                ++next;
            }
        }
    }

    std::vector<McEstimate> out(static_cast<std::size_t>(nm));
    for (int j = 0; j < nm; ++j) {
        double sum = 0.0;
        for (int path = 0; path < paths; ++path)
            sum += disc[static_cast<std::size_t>(path) * nm + j];
        const double mean = sum / paths;
        double ss = 0.0;
        for (int path = 0; path < paths; ++path) {
            const double d = disc[static_cast<std::size_t>(path) * nm + j] - mean;
            ss += d * d;
        }
        out[static_cast<std::size_t>(j)].value = mean;
        out[static_cast<std::size_t>(j)].std_error = std::sqrt(ss / (paths - 1.0) / paths);
    }
    return out;
}

}  // namespace

std::vector<McEstimate> mc_price_vasicek(const shortrate::FactorParams& p, double r0,
                                         const std::vector<double>& maturities, int paths,
                                         int steps_per_year, std::uint64_t seed) {
    return mc_price(p, r0, maturities, paths, steps_per_year, seed, false);
}

std::vector<McEstimate> mc_price_cir(const shortrate::FactorParams& p, double r0,
                                     const std::vector<double>& maturities, int paths,
                                     int steps_per_year, std::uint64_t seed) {
    return mc_price(p, r0, maturities, paths, steps_per_year, seed, true);
}

double fd_derivative(const std::function<double(double)>& f, double x, double h) {
    return (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h);
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double scale) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = scale * std::max(1.0, std::abs(x(i)));
        const auto fi = [&](double v) {
            Eigen::VectorXd y = x;
            y(i) = v;
            return f(y);
        };
        g(i) = fd_derivative(fi, x(i), h);
    }
    return g;
}

double joint_gaussian_loglik(const shortrate::ModelSpec& spec,
                             const shortrate::YieldPanel& panel) {
    const int d = spec.dimension();
    const int n = spec.n_maturities();
    const int T = panel.n_days();
    for (const auto& f : spec.factors)
        if (f.kind != shortrate::FactorKind::Vasicek)
            throw std::invalid_argument("joint Gaussian oracle needs an all-Vasicek model");

    const shortrate::StateSpaceMatrices ss = shortrate::build_state_space(spec);
    const Eigen::VectorXd h0e = ss.h0.rowwise().sum();

    // stationary factor law: Var = theta^2/(2 kappa), Corr(t,s) = e^{-k|t-s|dt}
    Eigen::VectorXd vstat(d), kap(d), eta(d);
    for (int i = 0; i < d; ++i) {
        const auto& p = spec.factors[static_cast<std::size_t>(i)].params;
        kap(i) = p.kappa;
        eta(i) = p.eta;
        vstat(i) = p.theta * p.theta / (2.0 * p.kappa);
    }

    const int N = T * n;
    Eigen::VectorXd mu(N), z(N);
    Eigen::MatrixXd cov(N, N);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < n; ++j) {
            mu(t * n + j) = h0e(j) + ss.h1.row(j).dot(eta);
            z(t * n + j) = panel.yields(t, j);
        }
    for (int t = 0; t < T; ++t)
        for (int s = 0; s < T; ++s) {
            Eigen::VectorXd cx(d);
            for (int i = 0; i < d; ++i)
                cx(i) = std::exp(-kap(i) * std::abs(t - s) * spec.dt) * vstat(i);
            Eigen::MatrixXd block = ss.h1 * cx.asDiagonal() * ss.h1.transpose();
            if (t == s) block.diagonal().array() += ss.sigma_eps2;
            cov.block(t * n, s * n, n, n) = block;
        }

    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw std::runtime_error("oracle covariance not PD");
    const Eigen::MatrixXd l = llt.matrixL();
    double logdet = 0.0;
    for (int i = 0; i < N; ++i) logdet += 2.0 * std::log(l(i, i));
    const Eigen::VectorXd resid = z - mu;
    const double quad = resid.dot(llt.solve(resid));
    return -0.5 * N * std::log(2.0 * std::numbers::pi) - 0.5 * logdet - 0.5 * quad;
}

double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile level outside (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    double q, r, x;
    if (p < plow) {
        q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    } else if (p <= phigh) {
        q = p - 0.5;
        r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    }
    return x;
}

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace oracles
