#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "action_solver.hpp"
#include "error.hpp"
#include "hamiltonian.hpp"
#include "legendre.hpp"
#include "torus.hpp"

namespace contact_action {

// Cutoffs are quintic smoothsteps S(s) = 6s^5 - 15s^4 + 10s^3 on a unit band:
// C^2, |S'| <= 15/8, |S''| <= 10/sqrt(3).
namespace smoothstep {

inline double value(double s)
{
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}

inline double d1(double s)
{
    if (s <= 0.0 || s >= 1.0) return 0.0;
    const double q = s * (1.0 - s);
    return 30.0 * q * q;
}

inline double d2(double s)
{
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
}

} // namespace smoothstep

/// rho_R(u): 1 on |u| <= R, 0 on |u| >= R + 1.
inline double bump_rho(double R, double u)
{
    if (!(R > 0.0)) throw Error(ErrorKind::invalid_input, "bump_rho needs R > 0");
    return 1.0 - smoothstep::value(std::abs(u) - R);
}

inline double bump_rho_derivative(double R, double u)
{
    const double sign = u < 0.0 ? -1.0 : 1.0;
    return -sign * smoothstep::d1(std::abs(u) - R);
}

/// alpha_R as a profile in r = |v|: 1 on r <= R + 1, 0 on r >= R + 2.
inline double bump_alpha_radial(double R, double r) { return 1.0 - smoothstep::value(r - (R + 1.0)); }
inline double bump_alpha_radial_d1(double R, double r) { return -smoothstep::d1(r - (R + 1.0)); }
inline double bump_alpha_radial_d2(double R, double r) { return -smoothstep::d2(r - (R + 1.0)); }

inline double bump_alpha(double R, const FiberVector& v)
{
    if (!(R > 0.0)) throw Error(ErrorKind::invalid_input, "bump_alpha needs R > 0");
    return bump_alpha_radial(R, v.norm());
}

/// beta(z) = z^3 for z > 0, else 0.
inline double beta(double z) { return z > 0.0 ? z * z * z : 0.0; }
inline double beta_d1(double z) { return z > 0.0 ? 3.0 * z * z : 0.0; }
inline double beta_d2(double z) { return z > 0.0 ? 6.0 * z : 0.0; }

/// 1.1 max{(max|Lbar| + max|Lbar_v|) / (R+1)^2, 1}.
inline double compute_mu_from_bounds(double max_abs_lbar, double max_abs_lbar_v, double R)
{
    const double floor_term = (max_abs_lbar + max_abs_lbar_v) / ((R + 1.0) * (R + 1.0));
    return 1.1 * std::max(floor_term, 1.0);
}

struct ModificationSampleSpec
{
    int x_points = 16;
    int x_points_2d = 4;
    /// Per-axis counts over |u| <= R+1 and each velocity axis |v_i| <= R+2.
    int u_points = 64;
    int v_points_1d = 64;
    int v_points_2d = 24;

    int x_per_axis(int dim) const { return dim == 1 ? x_points : x_points_2d; }
};

struct ModifiedLagrangian
{
    ContactLagrangian base;
    double R = 0.0;
    double mu = 0.0;
    /// Sampled sup of |dL_R/du|.
    double lambda_R = 0.0;
};

namespace detail {

// Lbar = (1 - rho) L(x,0,v) + rho L(x,u,v); on the plateau rho = 1 makes this exactly L.
inline double lbar(const ModifiedLagrangian& m, const TorusPoint& x, double u, const FiberVector& v)
{
    const double rho = bump_rho(m.R, u);
    return (1.0 - rho) * m.base.value(x, 0.0, v) + rho * m.base.value(x, u, v);
}

inline FiberVector lbar_v(const ModifiedLagrangian& m, const TorusPoint& x, double u, const FiberVector& v)
{
    const double rho = bump_rho(m.R, u);
    return (1.0 - rho) * m.base.d_v(x, 0.0, v) + rho * m.base.d_v(x, u, v);
}

inline SymMatrix add(SymMatrix a, const SymMatrix& b, double s = 1.0)
{
    a.a11 += s * b.a11;
    a.a12 += s * b.a12;
    a.a22 += s * b.a22;
    return a;
}

inline SymMatrix scaled(SymMatrix a, double s)
{
    a.a11 *= s;
    a.a12 *= s;
    a.a22 *= s;
    return a;
}

// sym(a b^T + b a^T)
inline SymMatrix sym_outer(const FiberVector& a, const FiberVector& b)
{
    SymMatrix out{a.dim()};
    out.a11 = 2.0 * a[0] * b[0];
    if (a.dim() == 2) {
        out.a12 = a[0] * b[1] + a[1] * b[0];
        out.a22 = 2.0 * a[1] * b[1];
    }
    return out;
}

template <class Fn>
void for_each_velocity(int dim, double vmax, int n1, int n2, Fn&& fn)
{
    if (dim == 1) {
        for (double a : linspace(-vmax, vmax, n1)) fn(FiberVector{a});
    } else {
        const auto axis = linspace(-vmax, vmax, n2);
        for (double a : axis) {
            for (double b : axis) fn(FiberVector{a, b});
        }
    }
}

} // namespace detail

/// L_R(x,u,v) = alpha_R(v) Lbar_R(x,u,v) + mu beta(|v|^2 - R^2).
inline double modified_eval(const ModifiedLagrangian& m, const TorusPoint& x, double u, const FiberVector& v)
{
    return bump_alpha(m.R, v) * detail::lbar(m, x, u, v) + m.mu * beta(v.squared_norm() - m.R * m.R);
}

/// Sampled max|Lbar| and max|Lbar_v| over |u| <= R+1, |v_i| <= R+2, then the mu formula.
inline double compute_mu(const ContactLagrangian& base, double R, const ModificationSampleSpec& spec = {})
{
    if (!(R > 0.0)) throw Error(ErrorKind::invalid_input, "compute_mu needs R > 0");
    ModifiedLagrangian probe{base, R, 0.0, 0.0};
    double max_l = 0.0;
    double max_lv = 0.0;
    const auto us = detail::linspace(-(R + 1.0), R + 1.0, spec.u_points);
    detail::for_each_torus_sample(base.dim, spec.x_per_axis(base.dim), [&](const TorusPoint& x) {
        for (double u : us) {
            detail::for_each_velocity(base.dim, R + 2.0, spec.v_points_1d, spec.v_points_2d, [&](const FiberVector& v) {
                max_l = std::max(max_l, std::abs(detail::lbar(probe, x, u, v)));
                max_lv = std::max(max_lv, detail::lbar_v(probe, x, u, v).norm());
            });
        }
    });
    return compute_mu_from_bounds(max_l, max_lv, R);
}

/// Composite Lagrangian with analytic partials, usable by every solver.
inline ContactLagrangian as_lagrangian(const ModifiedLagrangian& m)
{
    ContactLagrangian l;
    l.name = m.base.name;
    l.params = m.base.params;
    l.params["R"] = m.R;
    l.params["mu"] = m.mu;
    l.dim = m.base.dim;
    l.u_independent = m.base.u_independent;
    l.provenance = m.base.provenance;
    l.value = [m](const TorusPoint& x, double u, const FiberVector& v) { return modified_eval(m, x, u, v); };
    l.d_x = [m](const TorusPoint& x, double u, const FiberVector& v) {
        const double rho = bump_rho(m.R, u);
        return bump_alpha(m.R, v) * ((1.0 - rho) * m.base.d_x(x, 0.0, v) + rho * m.base.d_x(x, u, v));
    };
    l.d_u = [m](const TorusPoint& x, double u, const FiberVector& v) {
        const double rho = bump_rho(m.R, u);
        const double drho = bump_rho_derivative(m.R, u);
        const double gap = m.base.value(x, u, v) - m.base.value(x, 0.0, v);
        return bump_alpha(m.R, v) * (drho * gap + rho * m.base.d_u(x, u, v));
    };
    l.d_v = [m](const TorusPoint& x, double u, const FiberVector& v) {
        const double r = v.norm();
        const double alpha = bump_alpha_radial(m.R, r);
        const FiberVector lv = detail::lbar_v(m, x, u, v);
        FiberVector out = alpha * lv + (2.0 * m.mu * beta_d1(v.squared_norm() - m.R * m.R)) * v;
        if (r > 0.0) out += (bump_alpha_radial_d1(m.R, r) / r * detail::lbar(m, x, u, v)) * v;
        return out;
    };
    l.d_vv = [m](const TorusPoint& x, double u, const FiberVector& v) {
        const int n = v.dim();
        const double r = v.norm();
        const double z = v.squared_norm() - m.R * m.R;
        const double rho = bump_rho(m.R, u);
        const SymMatrix lvv = detail::add(detail::scaled(m.base.d_vv(x, 0.0, v), 1.0 - rho), m.base.d_vv(x, u, v), rho);
        SymMatrix out = detail::scaled(lvv, bump_alpha_radial(m.R, r));
        // mu (4 beta'' v v^T + 2 beta' I)
        out = detail::add(out, detail::sym_outer(v, v), 2.0 * m.mu * beta_d2(z));
        out = detail::add(out, SymMatrix::identity(n), 2.0 * m.mu * beta_d1(z));
        if (r > 0.0) {
            const double a1 = bump_alpha_radial_d1(m.R, r);
            const double a2 = bump_alpha_radial_d2(m.R, r);
            const FiberVector e = v * (1.0 / r);
            const double lb = detail::lbar(m, x, u, v);
            // Hess(alpha) = a'' e e^T + a'/r (I - e e^T)
            SymMatrix hess_alpha = detail::scaled(detail::sym_outer(e, e), 0.5 * (a2 - a1 / r));
            hess_alpha = detail::add(hess_alpha, SymMatrix::identity(n), a1 / r);
            out = detail::add(out, hess_alpha, lb);
            out = detail::add(out, detail::sym_outer(a1 * e, detail::lbar_v(m, x, u, v)));
        }
        return out;
    };
    return l;
}

struct ModifiedTonelliReport
{
    /// Min Hessian eigenvalue per velocity regime:
    /// (i) |v| <= R, (ii) R < |v| <= R+1, (iii) R+1 < |v| <= R+2, (iv) |v| > R+2.
    std::array<double, 4> min_eigenvalue{};
    std::array<bool, 4> sampled{};
    double lambda_R = 0.0;
    /// sup |L_R(x,u,v) - L_R(x,0,v)| over the samples.
    double u_oscillation = 0.0;
    /// min over regime (iv) samples of L_R - (|v|^2 - 1 + D).
    double superlinear_margin = 0.0;

    bool regime_passed(int i) const { return sampled[i] && min_eigenvalue[i] > 0.0; }
    bool all_passed() const
    {
        for (int i = 0; i < 4; ++i) {
            if (!regime_passed(i)) return false;
        }
        return std::isfinite(lambda_R) && std::isfinite(u_oscillation) && superlinear_margin > 0.0;
    }
};

inline const char* regime_label(int i)
{
    static const char* labels[] = {"(i) |v|<=R", "(ii) R<|v|<=R+1", "(iii) R+1<|v|<=R+2", "(iv) |v|>R+2"};
    return labels[i];
}

/// Samples the modified Lagrangian: finite-difference fiber Hessians per velocity regime,
/// sup |dL_R/du| and the u-oscillation over |u| <= R+2, and the superlinear floor beyond R+2.
inline ModifiedTonelliReport measure_modified_tonelli(const ModifiedLagrangian& m, const ModificationSampleSpec& spec = {})
{
    const ContactLagrangian l = as_lagrangian(m);
    const int dim = m.base.dim;
    const double R = m.R;
    const double h = 1e-4;
    ModifiedTonelliReport rep;
    rep.min_eigenvalue.fill(INFINITY);
    rep.superlinear_margin = INFINITY;

    // D: sampled lower bound of Lbar over the transition region, capped at 0
    double D = 0.0;
    const auto us = detail::linspace(-(R + 2.0), R + 2.0, std::max(9, spec.u_points / 4));
    detail::for_each_torus_sample(dim, spec.x_per_axis(dim), [&](const TorusPoint& x) {
        for (double u : us) {
            detail::for_each_velocity(dim, R + 2.0, 17, 9, [&](const FiberVector& v) {
                D = std::min(D, detail::lbar(m, x, u, v));
            });
        }
    });

    auto regime = [R](double r) { return r <= R ? 0 : (r <= R + 1.0 ? 1 : (r <= R + 2.0 ? 2 : 3)); };
    auto fd_hessian = [&](const TorusPoint& x, double u, const FiberVector& v) {
        auto f = [&](const FiberVector& w) { return l.value(x, u, w); };
        SymMatrix H{dim};
        const double f0 = f(v);
        auto shifted = [&](int a, double da, int b, double db) {
            FiberVector w = v;
            w[a] += da;
            if (b >= 0) w[b] += db;
            return f(w);
        };
        H.a11 = (shifted(0, h, -1, 0) - 2.0 * f0 + shifted(0, -h, -1, 0)) / (h * h);
        if (dim == 2) {
            H.a22 = (shifted(1, h, -1, 0) - 2.0 * f0 + shifted(1, -h, -1, 0)) / (h * h);
            H.a12 = (shifted(0, h, 1, h) - shifted(0, h, 1, -h) - shifted(0, -h, 1, h) + shifted(0, -h, 1, -h))
                    / (4.0 * h * h);
        }
        return H;
    };

    const double vmax = R + 4.0;
    const int n1 = 4 * spec.v_points_1d + 1;
    const int n2 = spec.v_points_2d + 9;
    detail::for_each_torus_sample(dim, spec.x_per_axis(dim), [&](const TorusPoint& x) {
        for (double u : us) {
            detail::for_each_velocity(dim, vmax, n1, n2, [&](const FiberVector& v) {
                const double r = v.norm();
                const int k = regime(r);
                rep.sampled[k] = true;
                rep.min_eigenvalue[k] = std::min(rep.min_eigenvalue[k], fd_hessian(x, u, v).min_eigenvalue());
                rep.lambda_R = std::max(rep.lambda_R, std::abs(l.d_u(x, u, v)));
                rep.u_oscillation = std::max(rep.u_oscillation, std::abs(l.value(x, u, v) - l.value(x, 0.0, v)));
                if (k == 3) {
                    rep.superlinear_margin = std::min(rep.superlinear_margin, l.value(x, u, v) - (r * r - 1.0 + D));
                }
            });
        }
    });
    return rep;
}

/// measure_modified_tonelli, raising a construction error naming the first failing regime.
inline ModifiedTonelliReport verify_modified_tonelli(const ModifiedLagrangian& m, const ModificationSampleSpec& spec = {})
{
    const auto rep = measure_modified_tonelli(m, spec);
    for (int i = 0; i < 4; ++i) {
        if (!rep.regime_passed(i)) {
            throw Error(ErrorKind::construction,
                        std::string("fiber Hessian of L_R not positive definite in regime ") + regime_label(i)
                            + " (min eigenvalue " + format_real(rep.min_eigenvalue[i]) + ", mu "
                            + format_real(m.mu) + ")");
        }
    }
    if (!rep.all_passed()) {
        throw Error(ErrorKind::construction, "L_R violates the Lipschitz/superlinearity bounds (margin "
                                                 + format_real(rep.superlinear_margin) + ")");
    }
    return rep;
}

/// Builds L_R with mu from compute_mu (or a forced value) and lambda_R from sampling.
inline ModifiedLagrangian make_modified(const ContactLagrangian& base, double R, std::optional<double> mu_override = {},
                                        const ModificationSampleSpec& spec = {})
{
    ModifiedLagrangian m{base, R, mu_override ? *mu_override : compute_mu(base, R, spec), 0.0};
    m.lambda_R = measure_modified_tonelli(m, spec).lambda_R;
    return m;
}

struct InvarianceResult
{
    /// max(|h| on the field, |v| along backtracked curves) of the unmodified solve.
    double observed_bound = 0.0;
    double difference = 0.0;
    double mu_1 = 0.0;
    double mu_2 = 0.0;
};

/// A priori bound of an unmodified solve: the larger of max |h| and the largest speed on
/// curves backtracked from every curve_stride-th node of the final layer.
inline double observed_apriori_bound(const ActionField& f, const ContactLagrangian& L, int curve_stride = 4)
{
    double bound = f.max_abs_finite();
    const int K = f.layers();
    const double T = f.layer_time(K);
    for (std::size_t n = 0; n < f.nodes(); n += static_cast<std::size_t>(std::max(1, curve_stride))) {
        if (!std::isfinite(f.at(K, n))) continue;
        for (const auto& s : backtrack_calibrated(f, L, f.node_point(n), T)) bound = std::max(bound, s.v.norm());
    }
    return bound;
}

/// Solves with L_{R1} and L_{R2} and returns the sup-norm gap of the two fields at T. Both R must
/// exceed the a priori bound observed on the unmodified solve, and both L_R must pass the
/// Tonelli sampling (mu_override forces mu, e.g. to exercise the failure path).
inline InvarianceResult check_invariance(const ActionSolver& solver, const TorusPoint& x0, double u0, double T, double R1,
                                         double R2, std::optional<double> mu_override = {},
                                         const ModificationSampleSpec& spec = {})
{
    const ContactLagrangian& L = solver.lagrangian();
    InvarianceResult res;
    const ActionField reference = solver.solve(x0, u0, T);
    res.observed_bound = observed_apriori_bound(reference, L);
    const double rmin = std::min(R1, R2);
    if (!(rmin > res.observed_bound)) {
        throw Error(ErrorKind::precondition_violation,
                    "cutoff R=" + format_real(rmin) + " does not exceed the observed a priori bound "
                        + format_real(res.observed_bound));
    }
    const ModifiedLagrangian m1 = make_modified(L, R1, mu_override, spec);
    const ModifiedLagrangian m2 = make_modified(L, R2, mu_override, spec);
    verify_modified_tonelli(m1, spec);
    verify_modified_tonelli(m2, spec);
    res.mu_1 = m1.mu;
    res.mu_2 = m2.mu;
    const ActionSolver s1(as_lagrangian(m1), solver.config(), solver.options());
    const ActionSolver s2(as_lagrangian(m2), solver.config(), solver.options());
    // compared at the horizon, where the bound was observed: on early layers a one-cell
    // step can be faster than any R, and there L_R and L legitimately differ
    const ActionField f1 = s1.solve(x0, u0, T);
    const ActionField f2 = s2.solve(x0, u0, T);
    const auto a = f1.layer(f1.layers());
    const auto b = f2.layer(f2.layers());
    for (std::size_t n = 0; n < a.size(); ++n) {
        if (std::isfinite(a[n]) && std::isfinite(b[n])) res.difference = std::max(res.difference, std::abs(a[n] - b[n]));
    }
    return res;
}

} // namespace contact_action
