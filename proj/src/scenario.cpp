#include "shortrate/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "shortrate/numerics.hpp"
#include "shortrate/rng.hpp"

namespace shortrate {

void ForecastRequest::validate() const {
    if (horizons.empty()) throw std::invalid_argument("forecast needs at least one horizon");
    int prev = 0;
    for (int h : horizons) {
        if (h <= prev) throw std::invalid_argument("horizons must be positive and increasing");
        prev = h;
    }
    if (paths < 1) throw std::invalid_argument("paths must be >= 1");
    for (double p : percentiles)
        if (!(p > 0.0 && p < 100.0))
            throw std::invalid_argument("percentile levels must lie in (0, 100)");
}

PathArray simulate_factors(const ModelSpec& spec, const Eigen::VectorXd& x_start, int steps,
                           int paths, std::uint64_t seed, bool parallel) {
    spec.validate();
    const int d = spec.dimension();
    if (x_start.size() != d) throw std::invalid_argument("start state dimension mismatch");
    if (!x_start.allFinite()) throw std::invalid_argument("start state must be finite");
    if (steps < 1 || paths < 1) throw std::invalid_argument("steps and paths must be >= 1");

    PathArray out;
    out.paths = paths;
    out.steps = steps;
    out.dims = d;
    out.data.resize(static_cast<std::size_t>(paths) * static_cast<std::size_t>(steps + 1) *
                    static_cast<std::size_t>(d));

#pragma omp parallel for schedule(static) if (parallel)
    for (int p = 0; p < paths; ++p) {
        RngStream rng(seed, static_cast<std::uint64_t>(p));
        double* row = out.data.data() + static_cast<std::size_t>(p) *
                                            static_cast<std::size_t>(steps + 1) *
                                            static_cast<std::size_t>(d);
        for (int i = 0; i < d; ++i) row[i] = x_start(i);
        for (int s = 1; s <= steps; ++s) {
            const double* prev = row + static_cast<std::size_t>(s - 1) * d;
            double* cur = row + static_cast<std::size_t>(s) * d;
            for (int i = 0; i < d; ++i) {
                const auto& f = spec.factors[static_cast<std::size_t>(i)];
                cur[i] = sample_transition(f.kind, f.params, prev[i], spec.dt, rng);
            }
        }
    }
    return out;
}

ForecastResult forecast_curves(const ModelSpec& spec, const Eigen::VectorXd& x_start,
                               const ForecastRequest& req, bool parallel) {
    spec.validate();
    req.validate();
    const int d = spec.dimension();
    if (x_start.size() != d) throw std::invalid_argument("start state dimension mismatch");
    if (!x_start.allFinite()) throw std::invalid_argument("start state must be finite");

    const int n = spec.n_maturities();
    const int nh = static_cast<int>(req.horizons.size());
    const int np = static_cast<int>(req.percentiles.size());
    const int max_h = req.horizons.back();
    const StateSpaceMatrices ss = build_state_space(spec);
    const Eigen::VectorXd h0e = ss.h0.rowwise().sum();

    // terminal factor states per horizon; paths stream, only checkpoints kept
    std::vector<Eigen::MatrixXd> states(static_cast<std::size_t>(nh));
    for (auto& m : states) m.resize(req.paths, d);

#pragma omp parallel for schedule(static) if (parallel)
    for (int p = 0; p < req.paths; ++p) {
        RngStream rng(req.seed, static_cast<std::uint64_t>(p));
        Eigen::VectorXd x = x_start;
        int next = 0;
        for (int s = 1; s <= max_h; ++s) {
            for (int i = 0; i < d; ++i) {
                const auto& f = spec.factors[static_cast<std::size_t>(i)];
                x(i) = sample_transition(f.kind, f.params, x(i), spec.dt, rng);
            }
            while (next < nh && req.horizons[static_cast<std::size_t>(next)] == s) {
                states[static_cast<std::size_t>(next)].row(p) = x.transpose();
                ++next;
            }
        }
    }

    ForecastResult out;
    out.maturities = spec.maturities;
    out.percentiles = req.percentiles;
    out.tables.resize(static_cast<std::size_t>(nh));
    if (req.keep_terminal_states) out.terminal_states = states;

    std::vector<double> sample(static_cast<std::size_t>(req.paths));
    for (int h = 0; h < nh; ++h) {
        ForecastTable& tab = out.tables[static_cast<std::size_t>(h)];
        tab.horizon = req.horizons[static_cast<std::size_t>(h)];
        tab.mean.resize(n);
        tab.percentile_values.resize(n, np);
        const Eigen::MatrixXd yields =
            ((states[static_cast<std::size_t>(h)] * ss.h1.transpose()).rowwise() +
             h0e.transpose());
        for (int j = 0; j < n; ++j) {
            CompensatedSum mean;
            for (int p = 0; p < req.paths; ++p) {
                sample[static_cast<std::size_t>(p)] = yields(p, j);
                mean.add(yields(p, j));
            }
            tab.mean(j) = mean.value() / req.paths;
            std::sort(sample.begin(), sample.end());
            for (int q = 0; q < np; ++q)
                tab.percentile_values(j, q) =
                    percentile_sorted(sample, req.percentiles[static_cast<std::size_t>(q)]);
        }
    }
    return out;
}

}  // namespace shortrate
