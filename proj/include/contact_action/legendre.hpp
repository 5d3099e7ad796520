#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"
#include "hamiltonian.hpp"

namespace contact_action {

struct LegendreOptions
{
    double tol = 1e-12;
    int max_iters = 50;
    int max_halvings = 8;
};

struct LegendreDualResult
{
    double lagrangian = 0.0;
    FiberVector p_star;
};

struct LegendreInverseResult
{
    double hamiltonian = 0.0;
    FiberVector v_star;
};

namespace detail {

// Finds z with grad(z) = target by damped Newton from z = target. grad must be
// the gradient of a fiber-convex function whose Hessian is hess.
template <class Grad, class Hess>
FiberVector newton_gradient_match(const FiberVector& target, Grad&& grad, Hess&& hess,
                                  const LegendreOptions& opt)
{
    FiberVector z = target;
    FiberVector r = grad(z) - target;
    double res = r.norm();
    for (int it = 0; it < opt.max_iters; ++it) {
        if (!std::isfinite(res)) break;
        if (res <= opt.tol) return z;
        const FiberVector step = hess(z).solve(r);
        double scale = 1.0;
        FiberVector trial = z - step;
        FiberVector trial_r = grad(trial) - target;
        for (int h = 0; h < opt.max_halvings && !(trial_r.norm() < res); ++h) {
            scale *= 0.5;
            trial = z - scale * step;
            trial_r = grad(trial) - target;
        }
        z = trial;
        r = trial_r;
        res = r.norm();
    }
    if (res <= opt.tol) return z;
    throw Error(ErrorKind::no_convergence,
                "Legendre Newton solve stalled, last residual " + std::to_string(res));
}

} // namespace detail

/// L(x,u,v) = sup_p <v,p> - H(x,u,p), with the maximizing momentum.
inline LegendreDualResult legendre_dual(const ContactHamiltonian& h, const TorusPoint& x, double u,
                                        const FiberVector& v, const LegendreOptions& opt = {})
{
    const FiberVector p = detail::newton_gradient_match(
        v, [&](const FiberVector& q) { return h.d_p(x, u, q); },
        [&](const FiberVector& q) { return h.d_pp(x, u, q); }, opt);
    return {dot(v, p) - h.value(x, u, p), p};
}

/// H(x,u,p) = sup_v <p,v> - L(x,u,v), with the maximizing velocity.
inline LegendreInverseResult legendre_inverse(const ContactLagrangian& l, const TorusPoint& x, double u,
                                              const FiberVector& p, const LegendreOptions& opt = {})
{
    const FiberVector v = detail::newton_gradient_match(
        p, [&](const FiberVector& w) { return l.d_v(x, u, w); },
        [&](const FiberVector& w) { return l.d_vv(x, u, w); }, opt);
    return {dot(p, v) - l.value(x, u, v), v};
}

/// Lagrangian evaluated through the numerical Legendre transform of h.
inline ContactLagrangian lagrangian_from_hamiltonian(const ContactHamiltonian& h,
                                                     const LegendreOptions& opt = {})
{
    ContactLagrangian l;
    l.name = h.name;
    l.params = h.params;
    l.dim = h.dim;
    l.provenance = LagrangianProvenance::legendre_of_hamiltonian;
    l.value = [h, opt](const TorusPoint& x, double u, const FiberVector& v) {
        return legendre_dual(h, x, u, v, opt).lagrangian;
    };
    l.d_x = [h, opt](const TorusPoint& x, double u, const FiberVector& v) {
        return -h.d_x(x, u, legendre_dual(h, x, u, v, opt).p_star);
    };
    l.d_u = [h, opt](const TorusPoint& x, double u, const FiberVector& v) {
        return -h.d_u(x, u, legendre_dual(h, x, u, v, opt).p_star);
    };
    l.d_v = [h, opt](const TorusPoint& x, double u, const FiberVector& v) {
        return legendre_dual(h, x, u, v, opt).p_star;
    };
    l.d_vv = [h, opt](const TorusPoint& x, double u, const FiberVector& v) {
        return h.d_pp(x, u, legendre_dual(h, x, u, v, opt).p_star).inverse();
    };
    return l;
}

struct PartialsEstimate
{
    FiberVector d_x;
    double d_u = 0.0;
    FiberVector d_fiber;
    SymMatrix d_fiber_fiber;
};

/// Central-difference partials of a phase-space function (H or L) at (x,u,w).
template <class PhaseFunction>
PartialsEstimate finite_diff_partials(const PhaseFunction& f, const TorusPoint& x, double u,
                                      const FiberVector& w, double h_fd)
{
    if (!(h_fd > 0.0)) throw Error(ErrorKind::invalid_input, "finite-difference step must be positive");
    const int n = x.dim();
    PartialsEstimate est;
    est.d_x = FiberVector(n);
    est.d_fiber = FiberVector(n);
    est.d_fiber_fiber.dim = n;
    auto unit = [n](int i, double s) {
        FiberVector e(n);
        e[i] = s;
        return e;
    };
    for (int i = 0; i < n; ++i) {
        est.d_x[i] = (f.value(translate(x, unit(i, h_fd)), u, w) - f.value(translate(x, unit(i, -h_fd)), u, w))
                     / (2.0 * h_fd);
        est.d_fiber[i] = (f.value(x, u, w + unit(i, h_fd)) - f.value(x, u, w - unit(i, h_fd))) / (2.0 * h_fd);
    }
    est.d_u = (f.value(x, u + h_fd, w) - f.value(x, u - h_fd, w)) / (2.0 * h_fd);

    const double f0 = f.value(x, u, w);
    auto second = [&](int i) {
        return (f.value(x, u, w + unit(i, h_fd)) - 2.0 * f0 + f.value(x, u, w - unit(i, h_fd))) / (h_fd * h_fd);
    };
    est.d_fiber_fiber.a11 = second(0);
    if (n == 2) {
        est.d_fiber_fiber.a22 = second(1);
        FiberVector pp(2), pm(2);
        pp[0] = pp[1] = pm[0] = h_fd;
        pm[1] = -h_fd;
        est.d_fiber_fiber.a12 = (f.value(x, u, w + pp) - f.value(x, u, w + pm) - f.value(x, u, w - pm)
                                 + f.value(x, u, w - pp))
                                / (4.0 * h_fd * h_fd);
    }
    return est;
}

struct AssumptionSampleSpec
{
    int x_points = 16;  // per axis
    int u_points = 9;
    double u_min = -2.0;
    double u_max = 2.0;
    int p_points = 9;   // per axis
    double p_max = 3.0;
    std::vector<double> superlinear_radii{10.0, 20.0, 40.0};
};

enum class CheckStatus { passed, failed, not_checked };

inline const char* to_string(CheckStatus s)
{
    switch (s) {
        case CheckStatus::passed: return "pass";
        case CheckStatus::failed: return "fail";
        case CheckStatus::not_checked: return "not checked";
    }
    return "?";
}

struct AssumptionReport
{
    double min_hessian_eigenvalue = INFINITY;
    /// min over (x,u,direction) of H/|p| at each superlinearity radius.
    std::vector<double> superlinear_ratios;
    double osgood_slack = INFINITY;

    CheckStatus positive_definite = CheckStatus::not_checked;  // fiber Hessian
    CheckStatus superlinear = CheckStatus::not_checked;        // growth faster than linear
    CheckStatus osgood = CheckStatus::not_checked;             // growth of <H_p,p> - H

    bool all_passed() const
    {
        return positive_definite == CheckStatus::passed && superlinear == CheckStatus::passed
               && osgood != CheckStatus::failed;
    }
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, int n)
{
    std::vector<double> v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return v;
}

// Calls fn on every point of the tensor grid of x samples (periodic, no endpoint).
template <class Fn>
void for_each_torus_sample(int dim, int per_axis, Fn&& fn)
{
    if (dim == 1) {
        for (int i = 0; i < per_axis; ++i) fn(TorusPoint{static_cast<double>(i) / per_axis});
    } else {
        for (int i = 0; i < per_axis; ++i) {
            for (int j = 0; j < per_axis; ++j) {
                fn(TorusPoint{static_cast<double>(i) / per_axis, static_cast<double>(j) / per_axis});
            }
        }
    }
}

template <class Fn>
void for_each_fiber_sample(int dim, double radius, int per_axis, Fn&& fn)
{
    const auto axis = linspace(-radius, radius, per_axis);
    if (dim == 1) {
        for (double a : axis) fn(FiberVector{a});
    } else {
        for (double a : axis) {
            for (double b : axis) fn(FiberVector{a, b});
        }
    }
}

inline std::vector<FiberVector> unit_directions(int dim)
{
    if (dim == 1) return {FiberVector{1.0}, FiberVector{-1.0}};
    const double s = std::sqrt(0.5);
    return {FiberVector{1.0, 0.0}, FiberVector{0.0, 1.0}, FiberVector{-1.0, 0.0}, FiberVector{0.0, -1.0},
            FiberVector{s, s},     FiberVector{-s, s},    FiberVector{s, -s},     FiberVector{-s, -s}};
}

} // namespace detail

/// Samples the Tonelli and Osgood conditions of h on a grid.
inline AssumptionReport check_assumptions(const ContactHamiltonian& h, const AssumptionSampleSpec& spec = {})
{
    AssumptionReport rep;
    const auto us = detail::linspace(spec.u_min, spec.u_max, spec.u_points);
    rep.superlinear_ratios.assign(spec.superlinear_radii.size(), INFINITY);
    const auto dirs = detail::unit_directions(h.dim);

    detail::for_each_torus_sample(h.dim, spec.x_points, [&](const TorusPoint& x) {
        for (double u : us) {
            detail::for_each_fiber_sample(h.dim, spec.p_max, spec.p_points, [&](const FiberVector& p) {
                rep.min_hessian_eigenvalue = std::min(rep.min_hessian_eigenvalue, h.d_pp(x, u, p).min_eigenvalue());
                if (h.osgood_majorant && u >= 0.0 && p.norm() <= spec.p_max * (1.0 + 1e-12)) {
                    const double growth = dot(h.d_p(x, u, p), p) - h.value(x, u, p);
                    rep.osgood_slack = std::min(rep.osgood_slack, h.osgood_majorant(u, spec.p_max) - growth);
                }
            });
            for (size_t k = 0; k < spec.superlinear_radii.size(); ++k) {
                const double r = spec.superlinear_radii[k];
                for (const auto& d : dirs) {
                    rep.superlinear_ratios[k] = std::min(rep.superlinear_ratios[k], h.value(x, u, r * d) / r);
                }
            }
        }
    });

    rep.positive_definite = rep.min_hessian_eigenvalue > 1e-10 ? CheckStatus::passed : CheckStatus::failed;
    bool increasing = rep.superlinear_ratios.size() >= 2;
    for (size_t k = 1; k < rep.superlinear_ratios.size(); ++k) {
        // ratios must grow by a visible margin, not by rounding
        if (!(rep.superlinear_ratios[k] > rep.superlinear_ratios[k - 1] * (1.0 + 1e-6) + 1e-9)) increasing = false;
    }
    rep.superlinear = increasing ? CheckStatus::passed : CheckStatus::failed;
    if (h.osgood_majorant) {
        // the catalog majorants are attained exactly at p_max, so allow for rounding
        const double scale = std::max(1.0, 0.5 * spec.p_max * spec.p_max);
        rep.osgood = rep.osgood_slack >= -1e-12 * scale ? CheckStatus::passed : CheckStatus::failed;
    }
    return rep;
}

} // namespace contact_action
