#include "shortrate/optim.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace shortrate::optim {

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                               const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return (x - project(x - g, lo, hi)).cwiseAbs().maxCoeff();
}

struct Pair {
    Eigen::VectorXd s, y;
    double rho;
};

/// Two-loop recursion; returns -H*g.
Eigen::VectorXd lbfgs_direction(const std::deque<Pair>& mem, const Eigen::VectorXd& g) {
    Eigen::VectorXd q = g;
    std::vector<double> alpha(mem.size());
    for (std::size_t i = mem.size(); i-- > 0;) {
        alpha[i] = mem[i].rho * mem[i].s.dot(q);
        q -= alpha[i] * mem[i].y;
    }
    if (!mem.empty()) {
        const Pair& last = mem.back();
        q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t i = 0; i < mem.size(); ++i) {
        const double beta = mem[i].rho * mem[i].y.dot(q);
        q += (alpha[i] - beta) * mem[i].s;
    }
    return -q;
}

}  // namespace

Result minimize_box(const Objective& fg, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                    const Eigen::VectorXd& upper, const Options& options) {
    if (x0.size() != lower.size() || x0.size() != upper.size())
        throw std::invalid_argument("optimizer: dimension mismatch");
    const Eigen::Index nv = x0.size();

    Result res;
    res.x = project(x0, lower, upper);
    res.gradient.resize(nv);
    res.f = fg(res.x, res.gradient);
    if (!std::isfinite(res.f)) throw std::runtime_error("objective not finite at start point");
    res.projected_gradient_norm = projected_gradient_norm(res.x, res.gradient, lower, upper);

    std::deque<Pair> memory;
    for (int it = 0; it < options.max_iterations; ++it) {
        if (res.projected_gradient_norm <= options.tolerance) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd dir = memory.empty() ? Eigen::VectorXd(-res.gradient)
                                             : lbfgs_direction(memory, res.gradient);
        if (!dir.allFinite() || res.gradient.dot(dir) >= 0.0) {
            memory.clear();
            dir = -res.gradient;
        }

        bool accepted = false;
        Eigen::VectorXd x_new, g_new(nv);
        double f_new = 0.0;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            double step = 1.0;
            for (int ls = 0; ls < options.max_line_search; ++ls, step *= 0.5) {
                x_new = project(res.x + step * dir, lower, upper);
                const Eigen::VectorXd dx = x_new - res.x;
                if (dx.cwiseAbs().maxCoeff() == 0.0) break;
                f_new = fg(x_new, g_new);
                if (std::isfinite(f_new) &&
                    f_new <= res.f + options.armijo * res.gradient.dot(dx)) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted && attempt == 0 && !memory.empty()) {
                memory.clear();
                dir = -res.gradient;  // retry with steepest descent
            } else {
                break;
            }
        }
        res.iterations = it + 1;
        if (!accepted) break;  // no improving point found along either direction

        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd y = g_new - res.gradient;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            memory.push_back({s, y, 1.0 / sy});
            while (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
        }
        res.x = x_new;
        res.f = f_new;
        res.gradient = g_new;
        res.projected_gradient_norm = projected_gradient_norm(res.x, res.gradient, lower, upper);
        if (res.projected_gradient_norm <= options.tolerance) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace shortrate::optim
