#pragma once

#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "hamiltonian.hpp"
#include "torus.hpp"

namespace contact_action {

struct ContactState
{
    TorusPoint x;
    double u = 0.0;
    FiberVector p;
    double t = 0.0;
};

struct ContactVelocity
{
    FiberVector dx;
    double du = 0.0;
    FiberVector dp;
};

struct Trajectory
{
    double dt = 0.0;
    std::vector<ContactState> states;
    /// dH/dp at each state.
    std::vector<FiberVector> velocities;
    /// Lift of the final position, continuous from the lift of states.front().x.
    FiberVector lifted_end;
};

/// Right-hand side of the contact Hamiltonian system:
/// x' = H_p, p' = -H_x - H_u p, u' = <H_p,p> - H.
inline ContactVelocity vector_field(const ContactHamiltonian& h, const TorusPoint& x, double u,
                                    const FiberVector& p)
{
    const FiberVector hp = h.d_p(x, u, p);
    const double hu = h.d_u(x, u, p);
    ContactVelocity f;
    f.dx = hp;
    f.dp = -h.d_x(x, u, p) - hu * p;
    f.du = dot(hp, p) - h.value(x, u, p);
    if (!f.dx.is_finite() || !f.dp.is_finite() || !std::isfinite(f.du)) {
        throw Error(ErrorKind::numerical_domain, "non-finite contact vector field");
    }
    return f;
}

inline ContactVelocity vector_field(const ContactHamiltonian& h, const ContactState& s)
{
    return vector_field(h, s.x, s.u, s.p);
}

namespace detail {

struct LiftedState
{
    FiberVector x;  // lifted position
    double u = 0.0;
    FiberVector p;
};

inline ContactVelocity lifted_field(const ContactHamiltonian& h, const LiftedState& s)
{
    return vector_field(h, wrap(s.x), s.u, s.p);
}

inline LiftedState rk4_step(const ContactHamiltonian& h, const LiftedState& s, double dt)
{
    auto shifted = [](const LiftedState& a, const ContactVelocity& k, double c) {
        return LiftedState{a.x + c * k.dx, a.u + c * k.du, a.p + c * k.dp};
    };
    const ContactVelocity k1 = lifted_field(h, s);
    const ContactVelocity k2 = lifted_field(h, shifted(s, k1, 0.5 * dt));
    const ContactVelocity k3 = lifted_field(h, shifted(s, k2, 0.5 * dt));
    const ContactVelocity k4 = lifted_field(h, shifted(s, k3, dt));
    const double w = dt / 6.0;
    LiftedState out;
    out.x = s.x + w * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
    out.u = s.u + w * (k1.du + 2.0 * k2.du + 2.0 * k3.du + k4.du);
    out.p = s.p + w * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
    return out;
}

inline bool finite(const LiftedState& s) { return s.x.is_finite() && std::isfinite(s.u) && s.p.is_finite(); }

inline std::string describe(const LiftedState& s, double t)
{
    std::ostringstream os;
    os.precision(17);
    os << "t=" << t << " x=(";
    for (int i = 0; i < s.x.dim(); ++i) os << (i ? "," : "") << s.x[i];
    os << ") u=" << s.u << " p=(";
    for (int i = 0; i < s.p.dim(); ++i) os << (i ? "," : "") << s.p[i];
    os << ")";
    return os.str();
}

inline int step_count(double t_final, double dt)
{
    if (!(dt > 0.0) || !(t_final >= dt * (1.0 - 1e-12))) {
        throw Error(ErrorKind::invalid_input, "integrate needs dt > 0 and t_final >= dt");
    }
    return static_cast<int>(std::ceil(t_final / dt - 1e-9));
}

} // namespace detail

/// Fixed-step classical RK4 run of the contact system from s0 over [t0, t0 + t_final].
/// The step is t_final / ceil(t_final / dt) so the last stamp lands on t_final.
inline Trajectory integrate(const ContactHamiltonian& h, const ContactState& s0, double t_final, double dt)
{
    const int steps = detail::step_count(t_final, dt);
    const double step = t_final / steps;
    Trajectory tr;
    tr.dt = step;
    tr.states.reserve(static_cast<size_t>(steps) + 1);
    tr.velocities.reserve(static_cast<size_t>(steps) + 1);

    detail::LiftedState cur{s0.x.lift(), s0.u, s0.p};
    tr.states.push_back({wrap(cur.x), cur.u, cur.p, s0.t});
    tr.velocities.push_back(h.d_p(tr.states.back().x, cur.u, cur.p));
    for (int k = 1; k <= steps; ++k) {
        detail::LiftedState next;
        try {
            next = detail::rk4_step(h, cur, step);
        } catch (const Error&) {
            throw Error(ErrorKind::blow_up, "contact flow left the finite domain after " + detail::describe(cur, s0.t + (k - 1) * step));
        }
        if (!detail::finite(next)) {
            throw Error(ErrorKind::blow_up, "contact flow blew up after " + detail::describe(cur, s0.t + (k - 1) * step));
        }
        cur = next;
        const double t = k == steps ? s0.t + t_final : s0.t + k * step;
        tr.states.push_back({wrap(cur.x), cur.u, cur.p, t});
        tr.velocities.push_back(h.d_p(tr.states.back().x, cur.u, cur.p));
    }
    tr.lifted_end = cur.x;
    return tr;
}

/// Final lifted state only; used by the shooting root finder.
inline ContactState flow_endpoint(const ContactHamiltonian& h, const ContactState& s0, double t_final, double dt,
                                  FiberVector* lifted_end = nullptr)
{
    const int steps = detail::step_count(t_final, dt);
    const double step = t_final / steps;
    detail::LiftedState cur{s0.x.lift(), s0.u, s0.p};
    for (int k = 1; k <= steps; ++k) {
        detail::LiftedState next;
        try {
            next = detail::rk4_step(h, cur, step);
        } catch (const Error&) {
            throw Error(ErrorKind::blow_up, "contact flow left the finite domain after " + detail::describe(cur, s0.t + (k - 1) * step));
        }
        if (!detail::finite(next)) {
            throw Error(ErrorKind::blow_up, "contact flow blew up after " + detail::describe(cur, s0.t + (k - 1) * step));
        }
        cur = next;
    }
    if (lifted_end) *lifted_end = cur.x;
    return {wrap(cur.x), cur.u, cur.p, s0.t + t_final};
}

/// CSV: t, x_1..x_n, u, p_1..p_n, v_1..v_n; one row per state, header first.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr)
{
    if (tr.states.empty()) return;
    const int n = tr.states.front().x.dim();
    os << "t";
    for (int i = 1; i <= n; ++i) os << ",x_" << i;
    os << ",u";
    for (int i = 1; i <= n; ++i) os << ",p_" << i;
    for (int i = 1; i <= n; ++i) os << ",v_" << i;
    os << "\n";
    const auto old_prec = os.precision(17);
    for (size_t k = 0; k < tr.states.size(); ++k) {
        const auto& s = tr.states[k];
        os << s.t;
        for (int i = 0; i < n; ++i) os << "," << s.x[i];
        os << "," << s.u;
        for (int i = 0; i < n; ++i) os << "," << s.p[i];
        for (int i = 0; i < n; ++i) os << "," << tr.velocities[k][i];
        os << "\n";
    }
    os.precision(old_prec);
}

} // namespace contact_action
