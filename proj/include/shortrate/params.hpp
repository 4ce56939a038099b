#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "shortrate/term_structure.hpp"

namespace shortrate {

enum class ParamSymbol { Kappa, Eta, Theta, SigmaEps };

/// Position of one free parameter: factor index (or -1 for sigma_eps) and
/// which of its symbols.
struct ParamRef {
    int factor = -1;
    ParamSymbol symbol = ParamSymbol::SigmaEps;
    bool operator==(const ParamRef&) const = default;
};

/// Ordering of the free-parameter vector: per factor (kappa, eta unless
/// pinned, theta), then sigma_eps last.
class ParamLayout {
public:
    static ParamLayout for_spec(const ModelSpec& spec);

    int size() const { return static_cast<int>(refs_.size()); }
    const std::vector<ParamRef>& refs() const { return refs_; }
    const ParamRef& ref(int i) const { return refs_[static_cast<std::size_t>(i)]; }
    /// Index of (factor, symbol) in the vector, -1 when pinned/absent.
    int index_of(int factor, ParamSymbol symbol) const;
    std::string name(int i) const;

    Eigen::VectorXd pack(const ModelSpec& spec) const;
    /// `base` with the free parameters replaced by `theta`.
    ModelSpec unpack(const ModelSpec& base, const Eigen::VectorXd& theta) const;

private:
    std::vector<ParamRef> refs_;
};

/// A free-parameter vector together with its layout.
struct ParamVector {
    ParamLayout layout;
    Eigen::VectorXd values;
};

/// Box constraints on the free parameters.
struct Bounds {
    Eigen::VectorXd lower, upper;

    /// Paper-standard defaults: (kappa, eta, theta) in [1e-4,1e-4,1e-4] to
    /// (5, 0.1, 0.5) for CIR, (5, 0.1, 0.1) for Vasicek; sigma_eps in
    /// [1e-4, 0.5].
    static Bounds defaults(const ModelSpec& spec, const ParamLayout& layout);
    void validate() const;
    bool contains(const Eigen::VectorXd& theta) const;
    Eigen::VectorXd project(const Eigen::VectorXd& theta) const;
};

}  // namespace shortrate
