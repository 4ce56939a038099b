#include "shortrate/params.hpp"

#include <stdexcept>

namespace shortrate {

ParamLayout ParamLayout::for_spec(const ModelSpec& spec) {
    ParamLayout layout;
    for (int i = 0; i < spec.dimension(); ++i) {
        const auto& f = spec.factors[static_cast<std::size_t>(i)];
        layout.refs_.push_back({i, ParamSymbol::Kappa});
        if (!f.params.eta_fixed_zero) layout.refs_.push_back({i, ParamSymbol::Eta});
        layout.refs_.push_back({i, ParamSymbol::Theta});
    }
    layout.refs_.push_back({-1, ParamSymbol::SigmaEps});
    return layout;
}

int ParamLayout::index_of(int factor, ParamSymbol symbol) const {
    for (int i = 0; i < size(); ++i)
        if (refs_[static_cast<std::size_t>(i)].factor == factor &&
            refs_[static_cast<std::size_t>(i)].symbol == symbol)
            return i;
    return -1;
}

std::string ParamLayout::name(int i) const {
    const ParamRef& r = ref(i);
    if (r.symbol == ParamSymbol::SigmaEps) return "sigma_eps";
    const std::string base = "factor" + std::to_string(r.factor + 1) + ".";
    switch (r.symbol) {
        case ParamSymbol::Kappa: return base + "kappa";
        case ParamSymbol::Eta: return base + "eta";
        default: return base + "theta";
    }
}

Eigen::VectorXd ParamLayout::pack(const ModelSpec& spec) const {
    Eigen::VectorXd theta(size());
    for (int i = 0; i < size(); ++i) {
        const ParamRef& r = ref(i);
        if (r.symbol == ParamSymbol::SigmaEps) {
            theta(i) = spec.sigma_eps;
            continue;
        }
        const auto& p = spec.factors[static_cast<std::size_t>(r.factor)].params;
        theta(i) = r.symbol == ParamSymbol::Kappa  ? p.kappa
                   : r.symbol == ParamSymbol::Eta ? p.eta
                                                  : p.theta;
    }
    return theta;
}

ModelSpec ParamLayout::unpack(const ModelSpec& base, const Eigen::VectorXd& theta) const {
    if (theta.size() != size()) throw std::invalid_argument("parameter vector size mismatch");
    ModelSpec spec = base;
    for (int i = 0; i < size(); ++i) {
        const ParamRef& r = ref(i);
        if (r.symbol == ParamSymbol::SigmaEps) {
            spec.sigma_eps = theta(i);
            continue;
        }
        auto& p = spec.factors[static_cast<std::size_t>(r.factor)].params;
        switch (r.symbol) {
            case ParamSymbol::Kappa: p.kappa = theta(i); break;
            case ParamSymbol::Eta: p.eta = theta(i); break;
            default: p.theta = theta(i); break;
        }
    }
    return spec;
}

Bounds Bounds::defaults(const ModelSpec& spec, const ParamLayout& layout) {
    Bounds b;
    b.lower.resize(layout.size());
    b.upper.resize(layout.size());
    for (int i = 0; i < layout.size(); ++i) {
        const ParamRef& r = layout.ref(i);
        if (r.symbol == ParamSymbol::SigmaEps) {
            b.lower(i) = 1e-4;
            b.upper(i) = 0.5;
            continue;
        }
        const bool cir = spec.factors[static_cast<std::size_t>(r.factor)].kind == FactorKind::Cir;
        b.lower(i) = 1e-4;
        switch (r.symbol) {
            case ParamSymbol::Kappa: b.upper(i) = 5.0; break;
            case ParamSymbol::Eta: b.upper(i) = 0.1; break;
            default: b.upper(i) = cir ? 0.5 : 0.1; break;
        }
    }
    return b;
}

void Bounds::validate() const {
    if (lower.size() != upper.size()) throw std::invalid_argument("bounds size mismatch");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
        if (!(lower(i) < upper(i)))
            throw std::invalid_argument("bounds must satisfy lower < upper");
}

bool Bounds::contains(const Eigen::VectorXd& theta) const {
    return (theta.array() >= lower.array()).all() && (theta.array() <= upper.array()).all();
}

Eigen::VectorXd Bounds::project(const Eigen::VectorXd& theta) const {
    return theta.cwiseMax(lower).cwiseMin(upper);
}

}  // namespace shortrate
