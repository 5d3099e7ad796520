#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "contact_flow.hpp"
#include "error.hpp"
#include "hamiltonian.hpp"
#include "parallel.hpp"
#include "torus.hpp"

namespace contact_action {

struct ShootingOptions
{
    /// Half-width of the box of initial momenta searched; 0 selects default_shooting_radius.
    double radius = 0.0;
    /// Lattice starts per axis.
    int multistart = 16;
    double dt = 1e-3;
    double tol_shoot = 1e-10;
    double cluster_eps = 1e-6;
    int max_newton = 40;
    double fd_step = 1e-7;
    unsigned workers = 1;
};

struct ShootingBranch
{
    FiberVector p0;
    ContactState terminal;
    double residual = INFINITY;
    bool converged = false;
};

/// A priori momentum bound: 2 (1 + diam / t) e^{lambda t}.
inline double default_shooting_radius(const ContactHamiltonian& h, double t)
{
    const double lambda = h.lipschitz_u.value_or(0.0);
    return 2.0 * (1.0 + torus_diameter(h.dim) / t) * std::exp(lambda * t);
}

namespace detail {

inline bool lex_less(const FiberVector& a, const FiberVector& b)
{
    for (int i = 0; i < a.dim(); ++i) {
        if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
}

inline double max_abs(const FiberVector& v)
{
    double m = 0.0;
    for (int i = 0; i < v.dim(); ++i) m = std::max(m, std::abs(v[i]));
    return m;
}

inline std::vector<FiberVector> lattice_shifts(int dim)
{
    std::vector<FiberVector> out;
    if (dim == 1) {
        for (int a = -1; a <= 1; ++a) out.push_back(FiberVector{static_cast<double>(a)});
    } else {
        for (int a = -1; a <= 1; ++a) {
            for (int b = -1; b <= 1; ++b) out.push_back(FiberVector{static_cast<double>(a), static_cast<double>(b)});
        }
    }
    return out;
}

inline std::vector<FiberVector> start_lattice(int dim, double radius, int per_axis)
{
    std::vector<double> axis(static_cast<size_t>(per_axis));
    for (int i = 0; i < per_axis; ++i) axis[i] = -radius + (i + 0.5) * (2.0 * radius / per_axis);
    std::vector<FiberVector> out;
    if (dim == 1) {
        for (double a : axis) out.push_back(FiberVector{a});
    } else {
        for (double a : axis) {
            for (double b : axis) out.push_back(FiberVector{a, b});
        }
    }
    return out;
}

// Damped Newton on p0 -> lifted X(t; p0) - (x0 + aim). Returns the root if found.
inline std::optional<FiberVector> polish(const ContactHamiltonian& h, const TorusPoint& x0, double u0,
                                         const FiberVector& aim, double t, FiberVector p0,
                                         const ShootingOptions& opt, double tol)
{
    const int n = x0.dim();
    const FiberVector base = x0.lift() + aim;
    auto residual = [&](const FiberVector& p) {
        FiberVector end;
        flow_endpoint(h, ContactState{x0, u0, p, 0.0}, t, opt.dt, &end);
        return end - base;
    };
    const double runaway = 4.0 * opt.radius + 1.0;
    try {
        FiberVector f = residual(p0);
        double res = f.norm();
        for (int it = 0; it < opt.max_newton; ++it) {
            if (res <= tol) return p0;
            FiberVector step(n);
            if (n == 1) {
                FiberVector pe = p0;
                pe[0] += opt.fd_step;
                const double j = (residual(pe)[0] - f[0]) / opt.fd_step;
                if (j == 0.0 || !std::isfinite(j)) return std::nullopt;
                step[0] = f[0] / j;
            } else {
                double jm[2][2];
                for (int c = 0; c < 2; ++c) {
                    FiberVector pe = p0;
                    pe[c] += opt.fd_step;
                    const FiberVector fe = residual(pe);
                    for (int r = 0; r < 2; ++r) jm[r][c] = (fe[r] - f[r]) / opt.fd_step;
                }
                const double det = jm[0][0] * jm[1][1] - jm[0][1] * jm[1][0];
                if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
                step[0] = (jm[1][1] * f[0] - jm[0][1] * f[1]) / det;
                step[1] = (jm[0][0] * f[1] - jm[1][0] * f[0]) / det;
            }
            double scale = 1.0;
            FiberVector trial = p0 - step;
            FiberVector ft = residual(trial);
            for (int k = 0; k < 8 && !(ft.norm() < res); ++k) {
                scale *= 0.5;
                trial = p0 - scale * step;
                ft = residual(trial);
            }
            if (!(ft.norm() < res)) return std::nullopt;
            p0 = trial;
            f = ft;
            res = f.norm();
            if (max_abs(p0) > runaway) return std::nullopt;
        }
        if (res <= tol) return p0;
    } catch (const Error&) {
        // starts that run into a blow-up simply do not yield a branch
    }
    return std::nullopt;
}

} // namespace detail

/// All distinct solutions of the contact system from (x0,u0) reaching x_target at time t,
/// found by Newton polishing from a lattice of initial momenta and every unit lattice shift
/// of the target. Branches come back sorted lexicographically by p0.
inline std::vector<ShootingBranch> shoot(const ContactHamiltonian& h, const TorusPoint& x0, double u0,
                                         const TorusPoint& x_target, double t, ShootingOptions opt = {})
{
    if (!(t > 0.0)) throw Error(ErrorKind::invalid_input, "shooting time must be positive");
    if (x0.dim() != h.dim || x_target.dim() != h.dim) {
        throw Error(ErrorKind::invalid_input, "dimension mismatch in shoot");
    }
    if (opt.radius <= 0.0) opt.radius = default_shooting_radius(h, t);
    if (opt.multistart < 1) throw Error(ErrorKind::invalid_input, "multistart must be >= 1");

    const FiberVector d = displacement(x0, x_target);
    const auto shifts = detail::lattice_shifts(h.dim);
    const auto starts = detail::start_lattice(h.dim, opt.radius, opt.multistart);
    const double tol = 0.5 * opt.tol_shoot;

    std::vector<std::optional<FiberVector>> roots(starts.size() * shifts.size());
    parallel_for(roots.size(), opt.workers, [&](std::size_t idx) {
        const auto& s = starts[idx / shifts.size()];
        const auto& k = shifts[idx % shifts.size()];
        roots[idx] = detail::polish(h, x0, u0, d + k, t, s, opt, tol);
    });

    std::vector<FiberVector> found;
    for (const auto& r : roots) {
        if (r && detail::max_abs(*r) <= opt.radius) found.push_back(*r);
    }
    std::sort(found.begin(), found.end(), detail::lex_less);

    std::vector<FiberVector> reps;
    for (const auto& p : found) {
        bool seen = false;
        for (const auto& q : reps) {
            if ((p - q).norm() <= opt.cluster_eps) {
                seen = true;
                break;
            }
        }
        if (!seen) reps.push_back(p);
    }

    std::vector<ShootingBranch> branches;
    for (const auto& p : reps) {
        ShootingBranch b;
        b.p0 = p;
        b.terminal = flow_endpoint(h, ContactState{x0, u0, p, 0.0}, t, opt.dt);
        b.residual = distance(b.terminal.x, x_target);
        b.converged = b.residual <= opt.tol_shoot;
        branches.push_back(b);
    }
    if (std::none_of(branches.begin(), branches.end(), [](const auto& b) { return b.converged; })) {
        throw Error(ErrorKind::no_solution,
                    "no converged branches (search radius " + std::to_string(opt.radius) + " too small or t too large)");
    }
    return branches;
}

struct ShootingMinimum
{
    double h_value = 0.0;
    ShootingBranch branch;
};

/// Minimal terminal action over the converged branches; ties go to the smallest |p0|,
/// then to the lexicographically smallest p0.
inline ShootingMinimum min_over_solutions(const std::vector<ShootingBranch>& branches)
{
    const ShootingBranch* best = nullptr;
    for (const auto& b : branches) {
        if (!b.converged) continue;
        if (!best) {
            best = &b;
            continue;
        }
        const double bu = b.terminal.u;
        const double cu = best->terminal.u;
        if (bu < cu) {
            best = &b;
        } else if (bu == cu) {
            const double bn = b.p0.norm();
            const double cn = best->p0.norm();
            if (bn < cn || (bn == cn && detail::lex_less(b.p0, best->p0))) best = &b;
        }
    }
    if (!best) throw Error(ErrorKind::no_solution, "no converged branches");
    return {best->terminal.u, *best};
}

/// CSV of shooting branches: p0_1..p0_n, x_1..x_n, u, residual, converged.
inline void write_branches_csv(std::ostream& os, const std::vector<ShootingBranch>& branches)
{
    if (branches.empty()) return;
    const int n = branches.front().p0.dim();
    for (int i = 1; i <= n; ++i) os << (i > 1 ? "," : "") << "p0_" << i;
    for (int i = 1; i <= n; ++i) os << ",x_" << i;
    os << ",u,residual,converged\n";
    const auto old = os.precision(17);
    for (const auto& b : branches) {
        for (int i = 0; i < n; ++i) os << (i ? "," : "") << b.p0[i];
        for (int i = 0; i < n; ++i) os << "," << b.terminal.x[i];
        os << "," << b.terminal.u << "," << b.residual << "," << (b.converged ? 1 : 0) << "\n";
    }
    os.precision(old);
}

} // namespace contact_action
