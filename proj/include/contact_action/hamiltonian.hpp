#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "torus.hpp"

namespace contact_action {

/// Symmetric n x n matrix, n <= 2.
struct SymMatrix
{
    int dim = 1;
    double a11 = 0.0;
    double a12 = 0.0;
    double a22 = 0.0;

    static SymMatrix identity(int dim) { return {dim, 1.0, 0.0, dim == 2 ? 1.0 : 0.0}; }
    static SymMatrix scaled_identity(int dim, double s) { return {dim, s, 0.0, dim == 2 ? s : 0.0}; }

    double min_eigenvalue() const
    {
        if (dim == 1) return a11;
        const double mean = 0.5 * (a11 + a22);
        const double half_diff = 0.5 * (a11 - a22);
        return mean - std::sqrt(half_diff * half_diff + a12 * a12);
    }

    FiberVector apply(const FiberVector& v) const
    {
        if (dim == 1) return FiberVector{a11 * v[0]};
        return FiberVector{a11 * v[0] + a12 * v[1], a12 * v[0] + a22 * v[1]};
    }

    /// Solves A x = b; throws on a singular matrix.
    FiberVector solve(const FiberVector& b) const
    {
        if (dim == 1) {
            if (a11 == 0.0) throw Error(ErrorKind::numerical_domain, "singular 1x1 system");
            return FiberVector{b[0] / a11};
        }
        const double det = a11 * a22 - a12 * a12;
        if (det == 0.0) throw Error(ErrorKind::numerical_domain, "singular 2x2 system");
        return FiberVector{(a22 * b[0] - a12 * b[1]) / det, (a11 * b[1] - a12 * b[0]) / det};
    }

    SymMatrix inverse() const
    {
        if (dim == 1) return {1, 1.0 / a11, 0.0, 0.0};
        const double det = a11 * a22 - a12 * a12;
        return {2, a22 / det, -a12 / det, a11 / det};
    }
};

using ParamMap = std::map<std::string, double>;

using PhaseScalarFn = std::function<double(const TorusPoint&, double, const FiberVector&)>;
using PhaseVectorFn = std::function<FiberVector(const TorusPoint&, double, const FiberVector&)>;
using PhaseMatrixFn = std::function<SymMatrix(const TorusPoint&, double, const FiberVector&)>;

/// Contact Hamiltonian H(x,u,p) with analytic partials.
struct ContactHamiltonian
{
    std::string name;
    ParamMap params;
    int dim = 1;

    PhaseScalarFn value;
    PhaseVectorFn d_x;
    PhaseScalarFn d_u;
    PhaseVectorFn d_p;
    PhaseMatrixFn d_pp;

    /// Known bound on |dH/du|, when one exists.
    std::optional<double> lipschitz_u;
    /// Osgood majorant f_K(u) for K = {|p| <= p_max}; absent when not known.
    std::function<double(double u, double p_max)> osgood_majorant;
};

enum class LagrangianProvenance { analytic, legendre_of_hamiltonian };

/// Contact Lagrangian L(x,u,v) with partials.
struct ContactLagrangian
{
    std::string name;
    ParamMap params;
    int dim = 1;

    PhaseScalarFn value;
    PhaseVectorFn d_x;
    PhaseScalarFn d_u;
    PhaseVectorFn d_v;
    PhaseMatrixFn d_vv;

    LagrangianProvenance provenance = LagrangianProvenance::analytic;

    /// True when L provably ignores u; lets solvers skip u bookkeeping.
    bool u_independent = false;
};

namespace catalog {

inline const std::vector<std::string>& names()
{
    static const std::vector<std::string> n{"classical", "discounted", "nonlinear_u"};
    return n;
}

namespace detail {

// The u-coupling g(u) shared by a Hamiltonian and its Lagrangian: H = K + V + g, L = K - V - g.
struct UCoupling
{
    std::function<double(double)> g;
    std::function<double(double)> dg;
    double lipschitz = 0.0;
    double sup_neg_g_on_positive = 0.0; // sup over u >= 0 of -g(u)
    bool trivial = false;
};

inline UCoupling coupling_for(const std::string& name, const ParamMap& params)
{
    UCoupling c;
    if (name == "classical") {
        c.g = [](double) { return 0.0; };
        c.dg = [](double) { return 0.0; };
        c.trivial = true;
    } else if (name == "discounted") {
        const double lambda = params.at("lambda");
        c.g = [lambda](double u) { return lambda * u; };
        c.dg = [lambda](double) { return lambda; };
        c.lipschitz = std::abs(lambda);
        c.sup_neg_g_on_positive = lambda >= 0.0 ? 0.0 : INFINITY;
    } else if (name == "nonlinear_u") {
        const double a = params.at("a");
        c.g = [a](double u) { return a * std::sin(u); };
        c.dg = [a](double u) { return a * std::cos(u); };
        c.lipschitz = std::abs(a);
        c.sup_neg_g_on_positive = std::abs(a);
    } else {
        std::string valid;
        for (const auto& n : names()) valid += (valid.empty() ? "" : ", ") + n;
        throw Error(ErrorKind::config, "unknown catalog entry '" + name + "' (valid: " + valid + ")");
    }
    return c;
}

inline ParamMap complete_params(const std::string& name, ParamMap params)
{
    params.try_emplace("epsilon", 0.0);
    if (name == "discounted") params.try_emplace("lambda", 0.5);
    if (name == "nonlinear_u") params.try_emplace("a", 0.3);
    return params;
}

} // namespace detail

/// H = |p|^2/2 + epsilon cos(2 pi x_1) + g(u), with g = 0, lambda u or a sin(u).
inline ContactHamiltonian hamiltonian(const std::string& name, ParamMap params, int dim = 1)
{
    check_dim(dim);
    params = detail::complete_params(name, std::move(params));
    const auto c = detail::coupling_for(name, params);
    const double eps = params.at("epsilon");
    constexpr double two_pi = 2.0 * std::numbers::pi;

    ContactHamiltonian h;
    h.name = name;
    h.params = params;
    h.dim = dim;
    h.value = [eps, g = c.g](const TorusPoint& x, double u, const FiberVector& p) {
        return 0.5 * p.squared_norm() + eps * std::cos(two_pi * x[0]) + g(u);
    };
    h.d_x = [eps, dim](const TorusPoint& x, double, const FiberVector&) {
        FiberVector d(dim);
        d[0] = -two_pi * eps * std::sin(two_pi * x[0]);
        return d;
    };
    h.d_u = [dg = c.dg](const TorusPoint&, double u, const FiberVector&) { return dg(u); };
    h.d_p = [](const TorusPoint&, double, const FiberVector& p) { return p; };
    h.d_pp = [dim](const TorusPoint&, double, const FiberVector&) { return SymMatrix::identity(dim); };
    h.lipschitz_u = c.lipschitz;
    // <H_p,p> - H = |p|^2/2 - eps cos - g(u) <= p_max^2/2 + |eps| + sup_{u>=0}(-g)
    const double slack = std::abs(eps) + c.sup_neg_g_on_positive;
    if (std::isfinite(slack)) {
        h.osgood_majorant = [slack](double, double p_max) { return 0.5 * p_max * p_max + slack; };
    }
    return h;
}

/// Closed-form Legendre dual of the catalog Hamiltonian of the same name.
inline ContactLagrangian lagrangian(const std::string& name, ParamMap params, int dim = 1)
{
    check_dim(dim);
    params = detail::complete_params(name, std::move(params));
    const auto c = detail::coupling_for(name, params);
    const double eps = params.at("epsilon");
    constexpr double two_pi = 2.0 * std::numbers::pi;

    ContactLagrangian l;
    l.name = name;
    l.params = params;
    l.dim = dim;
    l.u_independent = c.trivial;
    if (c.trivial) {
        l.value = [eps](const TorusPoint& x, double, const FiberVector& v) {
            return 0.5 * v.squared_norm() - eps * std::cos(two_pi * x[0]);
        };
    } else {
        l.value = [eps, g = c.g](const TorusPoint& x, double u, const FiberVector& v) {
            return 0.5 * v.squared_norm() - eps * std::cos(two_pi * x[0]) - g(u);
        };
    }
    l.d_x = [eps, dim](const TorusPoint& x, double, const FiberVector&) {
        FiberVector d(dim);
        d[0] = two_pi * eps * std::sin(two_pi * x[0]);
        return d;
    };
    l.d_u = [dg = c.dg](const TorusPoint&, double u, const FiberVector&) { return -dg(u); };
    l.d_v = [](const TorusPoint&, double, const FiberVector& v) { return v; };
    l.d_vv = [dim](const TorusPoint&, double, const FiberVector&) { return SymMatrix::identity(dim); };
    return l;
}

} // namespace catalog

} // namespace contact_action
