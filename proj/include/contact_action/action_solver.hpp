#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "action_field.hpp"
#include "contact_flow.hpp"
#include "error.hpp"
#include "hamiltonian.hpp"
#include "parallel.hpp"
#include "torus.hpp"

namespace contact_action {

/// Space-time lattice of the dynamic-programming solvers.
///
/// Paths step between layers with speed at most v_max. The departure point of a step
/// ranges over a lattice `refinement` times finer than the grid and is read by linear
/// interpolation; refinement = 1 is the plain grid-to-grid recursion.
struct DPConfig
{
    int m = 200;
    double dt = 0.005;
    double v_max = 0.0;
    /// 0 picks the smallest refinement whose velocity quantum dx / (refinement dt) is at most
    /// auto_velocity_quantum(dim).
    int refinement = 0;

    /// Grid nodes covered by one step: ceil(v_max dt m).
    int neighbor_radius() const { return static_cast<int>(std::ceil(v_max * dt * m - 1e-12)); }

    /// Largest displacement of one step. Never below one grid spacing, so the nearest
    /// neighbours stay reachable even when v_max dt is a fraction of a cell.
    double step_reach() const { return std::max(v_max * dt, 1.0 / m); }

    /// Velocity resolution targeted by automatic refinement. Quantizing velocities by q costs
    /// O(q^2) per unit time while interpolating departure values costs O(dx^2 / dt), so q is
    /// kept proportional to dx / sqrt(dt); 2D runs use a 4x coarser q since the stencil grows
    /// quadratically.
    double auto_velocity_quantum(int dim) const
    {
        const double q = 2.5 / (static_cast<double>(m) * std::sqrt(dt));
        return dim == 1 ? q : 4.0 * q;
    }

    /// Concrete refinement for a dim-dimensional run.
    DPConfig resolved(int dim) const
    {
        DPConfig c = *this;
        if (c.refinement == 0) {
            const double quantum = 1.0 / (static_cast<double>(m) * dt);
            c.refinement = std::max(1, static_cast<int>(std::ceil(quantum / auto_velocity_quantum(dim) - 1e-9)));
        }
        return c;
    }

    void validate() const
    {
        if (m < 2) throw Error(ErrorKind::invalid_input, "DPConfig: m must be >= 2");
        if (!(dt > 0.0)) throw Error(ErrorKind::invalid_input, "DPConfig: dt must be positive");
        if (!(v_max > 0.0)) throw Error(ErrorKind::invalid_input, "DPConfig: v_max must be positive");
        if (refinement < 0) throw Error(ErrorKind::invalid_input, "DPConfig: refinement must be >= 0 (0 = automatic)");
        if (!(v_max * dt < 0.5)) {
            throw Error(ErrorKind::invalid_input, "DPConfig: v_max * dt must stay below 1/2");
        }
        if (neighbor_radius() < 1) throw Error(ErrorKind::invalid_input, "DPConfig: stencil radius below one node");
    }
};

/// Slope cap 3 (1 + diam e^{lambda T} / T), clipped so one step stays below half a period.
inline double default_v_max(double lambda, double T, int dim, double dt)
{
    const double formula = 3.0 * (1.0 + torus_diameter(dim) * std::exp(lambda * T) / T);
    return std::min(formula, 0.45 / dt);
}

struct IterationRecord
{
    int iteration = 0;
    double sup_diff = 0.0;
    double seconds = 0.0;
};

using IterationTrace = std::vector<IterationRecord>;

class PicardNonConvergence : public Error
{
public:
    PicardNonConvergence(const std::string& what, IterationTrace trace)
        : Error(ErrorKind::no_convergence, what), trace_(std::move(trace))
    {}
    const IterationTrace& trace() const noexcept { return trace_; }

private:
    IterationTrace trace_;
};

/// u-slot of the Lagrangian during one Picard pass: a previous iterate or a constant.
struct FrozenU
{
    const ActionField* field = nullptr;
    double constant = 0.0;
};

namespace detail {

inline long floor_div(long a, long b)
{
    long q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

struct StencilEntry
{
    FiberVector disp;       // departure = node - disp
    FiberVector velocity;   // disp / dt
    long base[max_dim]{};   // departure cell, in node units relative to the node
    double frac[max_dim]{};
    long mid_base[max_dim]{};
    double mid_frac[max_dim]{};
};

inline void locate(long numerator, long denominator, long& base, double& frac)
{
    base = floor_div(numerator, denominator);
    frac = static_cast<double>(numerator - base * denominator) / static_cast<double>(denominator);
}

/// Fine offsets j (units of spacing / refinement) with |j| delta <= step_reach().
inline std::vector<StencilEntry> build_stencil(int dim, const DPConfig& cfg)
{
    const long s = cfg.refinement;
    const double delta = 1.0 / (static_cast<double>(cfg.m) * s);
    const double reach = cfg.step_reach();
    const long jmax = static_cast<long>(std::floor(reach / delta + 1e-9));
    std::vector<StencilEntry> out;
    auto add = [&](std::span<const long> j) {
        StencilEntry e;
        e.disp = FiberVector(dim);
        for (int a = 0; a < dim; ++a) {
            e.disp[a] = static_cast<double>(j[a]) * delta;
            locate(-j[a], s, e.base[a], e.frac[a]);
            locate(-j[a], 2 * s, e.mid_base[a], e.mid_frac[a]);
        }
        if (e.disp.norm() > reach * (1.0 + 1e-12)) return;
        e.velocity = e.disp * (1.0 / cfg.dt);
        out.push_back(e);
    };
    // departure offset q = -j ascending, so argmin ties resolve to the lowest predecessor
    if (dim == 1) {
        for (long q0 = -jmax; q0 <= jmax; ++q0) {
            const long j[1] = {-q0};
            add(j);
        }
    } else {
        for (long q0 = -jmax; q0 <= jmax; ++q0) {
            for (long q1 = -jmax; q1 <= jmax; ++q1) {
                const long j[2] = {-q0, -q1};
                add(j);
            }
        }
    }
    return out;
}

struct Grid
{
    int dim = 1;
    long m = 0;
    std::size_t nodes = 0;

    std::size_t wrap(long i) const { return static_cast<std::size_t>(((i % m) + m) % m); }

    void coords(std::size_t flat, long* i) const
    {
        if (dim == 1) {
            i[0] = static_cast<long>(flat);
        } else {
            i[0] = static_cast<long>(flat / m);
            i[1] = static_cast<long>(flat % m);
        }
    }

    std::size_t flat(const long* i) const
    {
        if (dim == 1) return wrap(i[0]);
        return wrap(i[0]) * m + wrap(i[1]);
    }
};

// Interpolates layer values at node i shifted by (base, frac). Strict mode returns
// unreachable as soon as a weighted corner is unreachable; lenient mode averages the
// finite corners and reports their total weight.
template <bool Strict>
double interpolate_shift(std::span<const double> values, const Grid& g, const long* i, const long* base,
                         const double* frac, double* weight_out = nullptr)
{
    double acc = 0.0;
    double wsum = 0.0;
    if (g.dim == 1) {
        for (int c = 0; c < 2; ++c) {
            const double w = c ? frac[0] : 1.0 - frac[0];
            if (w == 0.0) continue;
            const double v = values[g.wrap(i[0] + base[0] + c)];
            if (!std::isfinite(v)) {
                if (Strict) return unreachable;
                continue;
            }
            acc += w * v;
            wsum += w;
        }
    } else {
        for (int c0 = 0; c0 < 2; ++c0) {
            const double w0 = c0 ? frac[0] : 1.0 - frac[0];
            if (w0 == 0.0) continue;
            for (int c1 = 0; c1 < 2; ++c1) {
                const double w1 = c1 ? frac[1] : 1.0 - frac[1];
                if (w1 == 0.0) continue;
                const long k[2] = {i[0] + base[0] + c0, i[1] + base[1] + c1};
                const double v = values[g.flat(k)];
                if (!std::isfinite(v)) {
                    if (Strict) return unreachable;
                    continue;
                }
                acc += w0 * w1 * v;
                wsum += w0 * w1;
            }
        }
    }
    if (weight_out) *weight_out = wsum;
    if (Strict) return acc;
    return wsum > 0.0 ? acc / wsum : unreachable;
}

inline TorusPoint node_point(const Grid& g, const long* i)
{
    if (g.dim == 1) return TorusPoint{static_cast<double>(i[0]) / g.m};
    return TorusPoint{static_cast<double>(i[0]) / g.m, static_cast<double>(i[1]) / g.m};
}

inline TorusPoint step_midpoint(const Grid& g, const long* i, const StencilEntry& e)
{
    if (g.dim == 1) return TorusPoint{static_cast<double>(i[0]) / g.m - 0.5 * e.disp[0]};
    return TorusPoint{static_cast<double>(i[0]) / g.m - 0.5 * e.disp[0],
                      static_cast<double>(i[1]) / g.m - 0.5 * e.disp[1]};
}

// u of the previous iterate at the step midpoint and half-step time: the two adjacent
// layers are averaged over their reachable corners.
inline double frozen_u_at_mid(const ActionField& f, const Grid& g, int k, const long* i, const StencilEntry& e,
                              double fallback)
{
    double w_lo = 0.0;
    double w_hi = 0.0;
    const double lo = interpolate_shift<false>(f.layer(k), g, i, e.mid_base, e.mid_frac, &w_lo);
    const double hi = interpolate_shift<false>(f.layer(k + 1), g, i, e.mid_base, e.mid_frac, &w_hi);
    const bool has_lo = w_lo > 0.0;
    const bool has_hi = w_hi > 0.0;
    if (has_lo && has_hi) return 0.5 * (lo + hi);
    if (has_lo) return lo;
    if (has_hi) return hi;
    return fallback;
}

// One-step layer from x0: dt L(midpoint, u0, disp / dt) where |disp| <= step_reach().
inline void base_layer(const ContactLagrangian& L, const Grid& g, const TorusPoint& x0, double u0,
                       const DPConfig& cfg, std::span<double> out)
{
    const double reach = cfg.step_reach() * (1.0 + 1e-12);
    for (std::size_t n = 0; n < g.nodes; ++n) {
        long i[max_dim];
        g.coords(n, i);
        const TorusPoint x = node_point(g, i);
        const FiberVector d = displacement(x0, x);
        if (d.norm() > reach) {
            out[n] = unreachable;
            continue;
        }
        out[n] = cfg.dt * L.value(translate(x0, 0.5 * d), u0, d * (1.0 / cfg.dt));
    }
}

// V(x, t_{k+1}) = min over the stencil of V(y, t_k) + dt L(mid, u(...), disp / dt).
// UFn(i, entry, v_departure) yields the u-slot; argmin ties go to the first stencil entry.
template <class UFn>
void advance_layer(const ContactLagrangian& L, const Grid& g, const std::vector<StencilEntry>& stencil,
                   std::span<const double> prev, std::span<double> next, double dt, unsigned workers, UFn&& u_of)
{
    parallel_for(g.nodes, workers, [&](std::size_t n) {
        long i[max_dim];
        g.coords(n, i);
        double best = unreachable;
        for (const auto& e : stencil) {
            const double vy = interpolate_shift<true>(prev, g, i, e.base, e.frac);
            if (!std::isfinite(vy)) continue;
            const double u = u_of(i, e, vy);
            const double c = vy + dt * L.value(step_midpoint(g, i, e), u, e.velocity);
            if (c < best) best = c;
        }
        next[n] = best;
    });
}

inline Grid grid_of(const ActionField& f) { return {f.dim(), f.m(), f.nodes()}; }

inline void stamp(ActionField& f, const ContactLagrangian& L, const DPConfig& cfg, const char* scheme)
{
    f.scheme = scheme;
    f.v_max = cfg.v_max;
    f.refinement = cfg.refinement;
    f.metadata["entry"] = L.name;
    for (const auto& [k, v] : L.params) f.metadata["param." + k] = format_real(v);
}

inline void require_reachable(const ActionField& f)
{
    const auto last = f.layer(f.layers());
    if (std::none_of(last.begin(), last.end(), [](double v) { return std::isfinite(v); })) {
        throw Error(ErrorKind::infeasible_grid, "no grid node reachable at the horizon; raise v_max");
    }
}

template <class UAt>
ActionField run_recursion(const ContactLagrangian& L, const TorusPoint& x0, double u0, double T,
                          const DPConfig& requested, unsigned workers, const char* scheme, UAt&& u_rule)
{
    requested.validate();
    const DPConfig cfg = requested.resolved(x0.dim());
    if (x0.dim() != L.dim) throw Error(ErrorKind::invalid_input, "dimension mismatch between x0 and L");
    ActionField f(x0, u0, T, cfg.m, cfg.dt);
    stamp(f, L, cfg, scheme);
    const Grid g = grid_of(f);
    const auto stencil = build_stencil(g.dim, cfg);

    std::vector<double> prev(g.nodes), next(g.nodes);
    base_layer(L, g, x0, u0, cfg, prev);
    for (std::size_t n = 0; n < g.nodes; ++n) f.at(1, n) = u0 + prev[n];
    for (int k = 1; k < f.layers(); ++k) {
        advance_layer(L, g, stencil, prev, next, cfg.dt, workers,
                      [&](const long* i, const StencilEntry& e, double vy) { return u_rule(k, i, e, vy); });
        for (std::size_t n = 0; n < g.nodes; ++n) f.at(k + 1, n) = u0 + next[n];
        std::swap(prev, next);
    }
    require_reachable(f);
    return f;
}

} // namespace detail

/// One pass of the implicit minimization with the u-slot of L frozen: returns u0 + V with
/// V the minimal discrete action of L(x, u_field(x,t), v) from x0.
inline ActionField dp_min_action(const ContactLagrangian& L, const FrozenU& u_field, const TorusPoint& x0,
                                 double u0, double T, const DPConfig& cfg, unsigned workers = 1)
{
    if (u_field.field) {
        const ActionField& uf = *u_field.field;
        if (uf.m() != cfg.m || uf.layers() != layer_count(T, cfg.dt) || uf.dim() != x0.dim()) {
            throw Error(ErrorKind::invalid_input, "u_field lives on a different grid");
        }
    }
    if (L.u_independent || !u_field.field) {
        const double c = u_field.constant;
        return detail::run_recursion(L, x0, u0, T, cfg, workers, "picard",
                                     [c](int, const long*, const detail::StencilEntry&, double) { return c; });
    }
    const ActionField& uf = *u_field.field;
    const detail::Grid ug = detail::grid_of(uf);
    return detail::run_recursion(
        L, x0, u0, T, cfg, workers, "picard", [&uf, &ug, u0](int k, const long* i, const detail::StencilEntry& e, double) {
            return detail::frozen_u_at_mid(uf, ug, k, i, e, u0);
        });
}

struct PicardResult
{
    ActionField field;
    IterationTrace trace;
};

/// Fixed-point iteration h_{i+1} = dp_min_action(L, h_i) from the constant field h_0 = initial,
/// stopped once the sup-norm change is at most tol_fix.
inline PicardResult picard_iterate(const ContactLagrangian& L, const TorusPoint& x0, double u0, double T,
                                   const DPConfig& cfg, double tol_fix = 1e-9, int max_outer = 60,
                                   double initial = 0.0, unsigned workers = 1)
{
    if (!(tol_fix > 0.0)) throw Error(ErrorKind::invalid_input, "tol_fix must be positive");
    using clock = std::chrono::steady_clock;
    PicardResult res;
    auto t0 = clock::now();
    ActionField current = dp_min_action(L, FrozenU{nullptr, initial}, x0, u0, T, cfg, workers);
    double d = 0.0;
    for (double v : current.values()) {
        if (std::isfinite(v)) d = std::max(d, std::abs(v - initial));
    }
    res.trace.push_back({1, d, std::chrono::duration<double>(clock::now() - t0).count()});
    if (d <= tol_fix) {
        res.field = std::move(current);
        return res;
    }
    for (int it = 2; it <= max_outer; ++it) {
        t0 = clock::now();
        ActionField next = dp_min_action(L, FrozenU{&current, 0.0}, x0, u0, T, cfg, workers);
        d = sup_difference(next, current);
        res.trace.push_back({it, d, std::chrono::duration<double>(clock::now() - t0).count()});
        current = std::move(next);
        if (d <= tol_fix) {
            res.field = std::move(current);
            return res;
        }
    }
    throw PicardNonConvergence("Picard iteration did not reach tol_fix in " + std::to_string(max_outer)
                                   + " passes; last change " + format_real(d),
                               res.trace);
}

/// Forward marching of the one-step semigroup: the u-slot of each step is the current
/// value at its departure point.
inline ActionField semigroup_march(const ContactLagrangian& L, const TorusPoint& x0, double u0, double T,
                                   const DPConfig& cfg, unsigned workers = 1)
{
    if (L.u_independent) {
        return detail::run_recursion(L, x0, u0, T, cfg, workers, "semigroup",
                                     [](int, const long*, const detail::StencilEntry&, double) { return 0.0; });
    }
    return detail::run_recursion(L, x0, u0, T, cfg, workers, "semigroup",
                                 [u0](int, const long*, const detail::StencilEntry&, double vy) { return u0 + vy; });
}

enum class Scheme { picard, semigroup };

inline const char* to_string(Scheme s) { return s == Scheme::picard ? "picard" : "semigroup"; }

struct SolverOptions
{
    Scheme scheme = Scheme::picard;
    double tol_fix = 1e-9;
    int max_outer = 60;
    double initial = 0.0;
    unsigned workers = 1;
};

/// A Lagrangian bundled with its discretization; solve() yields h_{x0,u0} on (0,T].
class ActionSolver
{
public:
    ActionSolver(ContactLagrangian lagrangian, DPConfig cfg, SolverOptions opt = {})
        : L_(std::move(lagrangian)), cfg_(cfg), opt_(opt)
    {
        cfg_.validate();
    }

    const ContactLagrangian& lagrangian() const noexcept { return L_; }
    const DPConfig& config() const noexcept { return cfg_; }
    const SolverOptions& options() const noexcept { return opt_; }

    ActionField solve(const TorusPoint& x0, double u0, double T) const
    {
        if (opt_.scheme == Scheme::semigroup) return semigroup_march(L_, x0, u0, T, cfg_, opt_.workers);
        return picard_iterate(L_, x0, u0, T, cfg_, opt_.tol_fix, opt_.max_outer, opt_.initial, opt_.workers).field;
    }

    ActionSolver with_workers(unsigned w) const
    {
        ActionSolver s = *this;
        s.opt_.workers = w;
        return s;
    }

private:
    ContactLagrangian L_;
    DPConfig cfg_;
    SolverOptions opt_;
};

struct CurveSample
{
    double t = 0.0;
    TorusPoint x;
    double u = 0.0;
    FiberVector v;
};

using Curve = std::vector<CurveSample>;

/// Samples (t, x, u, dH/dp) of an integrated contact trajectory.
inline Curve curve_from_trajectory(const Trajectory& tr)
{
    Curve c;
    c.reserve(tr.states.size());
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
        c.push_back({tr.states[k].t, tr.states[k].x, tr.states[k].u, tr.velocities[k]});
    }
    return c;
}

namespace detail {

inline double lenient_at(const ActionField& f, int k, const TorusPoint& x, double* weight)
{
    const Grid g = grid_of(f);
    long i[max_dim];
    long base[max_dim];
    double frac[max_dim];
    for (int a = 0; a < f.dim(); ++a) {
        const double pos = x[a] * f.m();
        i[a] = 0;
        base[a] = static_cast<long>(std::floor(pos));
        frac[a] = pos - base[a];
    }
    return interpolate_shift<false>(f.layer(k), g, i, base, frac, weight);
}

} // namespace detail

/// Follows argmin predecessors of the field's own recursion from (x, t) back to (x0, 0).
/// Velocities are step displacements over dt (averaged over the two adjacent steps at
/// interior samples); u is read from the field.
inline Curve backtrack_calibrated(const ActionField& field, const ContactLagrangian& L, const TorusPoint& x, double t)
{
    const int k = field.layer_of(t);
    if (k < 1) throw Error(ErrorKind::invalid_input, "backtrack time is not a layer of the field");
    if (x.dim() != field.dim()) throw Error(ErrorKind::invalid_input, "dimension mismatch in backtrack");
    DPConfig cfg;
    cfg.m = field.m();
    cfg.dt = field.dt();
    cfg.v_max = field.v_max;
    cfg.refinement = field.refinement;
    const auto stencil = detail::build_stencil(field.dim(), cfg);
    const bool semigroup = field.scheme == "semigroup";
    const double dt = field.dt();

    std::vector<TorusPoint> pts(static_cast<std::size_t>(k) + 1);
    pts[k] = x;
    for (int j = k; j >= 2; --j) {
        const TorusPoint& cur = pts[j];
        double best = unreachable;
        const detail::StencilEntry* arg = nullptr;
        for (const auto& e : stencil) {
            const TorusPoint y = translate(cur, -e.disp);
            const double hy = field.interpolate_layer(j - 1, y);
            if (!std::isfinite(hy)) continue;
            const TorusPoint mid = translate(cur, -0.5 * e.disp);
            double u = 0.0;
            if (!L.u_independent) {
                if (semigroup) {
                    u = hy;
                } else {
                    double wl = 0.0;
                    double wh = 0.0;
                    const double lo = detail::lenient_at(field, j - 1, mid, &wl);
                    const double hi = detail::lenient_at(field, j, mid, &wh);
                    u = (wl > 0.0 && wh > 0.0) ? 0.5 * (lo + hi) : (wl > 0.0 ? lo : (wh > 0.0 ? hi : field.u0()));
                }
            }
            const double c = hy + dt * L.value(mid, u, e.velocity);
            if (c < best) {
                best = c;
                arg = &e;
            }
        }
        if (!arg) {
            throw Error(ErrorKind::internal_consistency,
                        "broken predecessor chain at layer " + std::to_string(j));
        }
        pts[j - 1] = translate(cur, -arg->disp);
    }
    if (displacement(field.x0(), pts[1]).norm() > std::max(field.v_max * dt, field.spacing()) * (1.0 + 1e-9) + 1e-12) {
        throw Error(ErrorKind::internal_consistency, "backtracked curve does not reach x0 in the first step");
    }
    pts[0] = field.x0();

    std::vector<FiberVector> seg(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) seg[j] = displacement(pts[j], pts[j + 1]) * (1.0 / dt);

    Curve c(static_cast<std::size_t>(k) + 1);
    for (int j = 0; j <= k; ++j) {
        c[j].t = j == 0 ? 0.0 : field.layer_time(j);
        c[j].x = pts[j];
        c[j].u = j == 0 ? field.u0() : field.interpolate_layer(j, pts[j]);
        if (j == 0) {
            c[j].v = seg[0];
        } else if (j == k) {
            c[j].v = seg[k - 1];
        } else {
            c[j].v = 0.5 * (seg[j - 1] + seg[j]);
        }
    }
    return c;
}

/// Max over samples of |d/dt L_v - L_x - L_u L_v| / max(1, |L_v|). The time derivative is
/// the least-squares slope over the 2 half_window + 1 samples centred at each point, which
/// is the plain centred difference for half_window = 1 and averages out the velocity
/// quantization of grid curves for wider windows.
inline double herglotz_residual(const ContactLagrangian& L, const Curve& curve, int half_window = 1)
{
    if (half_window < 1) throw Error(ErrorKind::invalid_input, "half_window must be >= 1");
    const int n = static_cast<int>(curve.size());
    if (n < 2 * half_window + 1) throw Error(ErrorKind::invalid_input, "curve too short for the residual stencil");
    std::vector<FiberVector> mom(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) mom[i] = L.d_v(curve[i].x, curve[i].u, curve[i].v);
    double worst = 0.0;
    for (int i = half_window; i < n - half_window; ++i) {
        const auto& s = curve[i];
        FiberVector num(s.v.dim());
        double den = 0.0;
        for (int j = -half_window; j <= half_window; ++j) {
            const double tau = curve[i + j].t - s.t;
            num += tau * (mom[i + j] - mom[i]);
            den += tau * tau;
        }
        const FiberVector dp = num * (1.0 / den);
        const FiberVector rhs = L.d_x(s.x, s.u, s.v) + L.d_u(s.x, s.u, s.v) * mom[i];
        worst = std::max(worst, (dp - rhs).norm() / std::max(1.0, mom[i].norm()));
    }
    return worst;
}

struct MarkovDefect
{
    double defect = 0.0;
    /// Node attaining the defect.
    std::size_t worst_node = 0;
    int fresh_solves = 0;
};

/// Compares h(x, t+s) with min_y h_{y, h(y,t)}(x, s), the fresh solves starting from every
/// y_stride-th grid node of the layer at time t.
inline MarkovDefect markov_defect(const ActionSolver& solver, const ActionField& field, double t, double s,
                                  int y_stride = 1)
{
    const double dt = field.dt();
    const int kt = field.layer_of(t);
    const int kts = field.layer_of(t + s);
    if (kt < 1 || kts < 1 || !(s >= dt * (1.0 - 1e-12))) {
        throw Error(ErrorKind::invalid_input, "markov_defect needs t, s >= dt on layers with t + s <= T");
    }
    if (y_stride < 1) throw Error(ErrorKind::invalid_input, "y_stride must be >= 1");
    const double s_layers = (kts - kt) * dt;

    std::vector<std::size_t> ys;
    for (std::size_t n = 0; n < field.nodes(); ++n) {
        const TorusPoint p = field.node_point(n);
        long ix = std::lround(p[0] * field.m());
        long iy = field.dim() == 2 ? std::lround(p[1] * field.m()) : 0;
        if (ix % y_stride == 0 && iy % y_stride == 0 && std::isfinite(field.at(kt, n))) ys.push_back(n);
    }

    std::vector<std::vector<double>> finals(ys.size());
    const ActionSolver inner = solver.with_workers(1);
    parallel_for(ys.size(), solver.options().workers, [&](std::size_t idx) {
        const std::size_t n = ys[idx];
        const ActionField fresh = inner.solve(field.node_point(n), field.at(kt, n), s_layers);
        const auto last = fresh.layer(fresh.layers());
        finals[idx].assign(last.begin(), last.end());
    });

    MarkovDefect out;
    out.fresh_solves = static_cast<int>(ys.size());
    for (std::size_t n = 0; n < field.nodes(); ++n) {
        double rhs = unreachable;
        for (const auto& f : finals) rhs = std::min(rhs, f[n]);
        const double lhs = field.at(kts, n);
        if (!std::isfinite(lhs) && !std::isfinite(rhs)) continue;
        const double gap = (std::isfinite(lhs) && std::isfinite(rhs)) ? std::abs(lhs - rhs) : unreachable;
        if (gap > out.defect) {
            out.defect = gap;
            out.worst_node = n;
        }
    }
    return out;
}

/// B^t(x,u;y) = h_{x,u}(y,t) - u.
inline double triangle_b(const ActionSolver& solver, const TorusPoint& x, double u, const TorusPoint& y, double t)
{
    if (!(t > 0.0)) throw Error(ErrorKind::invalid_input, "triangle_b needs t > 0");
    return solver.solve(x, u, t).value_at(y, t) - u;
}

} // namespace contact_action
