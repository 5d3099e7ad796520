#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "torus.hpp"

namespace contact_action {

inline constexpr double unreachable = std::numeric_limits<double>::infinity();

/// Number of layers K with K dt = T; throws when dt does not divide T.
inline int layer_count(double T, double dt, double rel_tol = 1e-9)
{
    if (!(T > 0.0) || !(dt > 0.0)) throw Error(ErrorKind::invalid_input, "T and dt must be positive");
    const double k = std::round(T / dt);
    if (k < 1.0 || std::abs(k * dt - T) > rel_tol * T) {
        throw Error(ErrorKind::invalid_input, "dt does not divide T");
    }
    return static_cast<int>(k);
}

/// Discretized action function h(x,t) on an m^n periodic grid times the layers t_k = k dt, k = 1..K.
/// Off-grid values are multilinear in x and linear in t.
class ActionField
{
public:
    ActionField() = default;

    ActionField(TorusPoint x0, double u0, double T, int m, double dt)
        : x0_(x0), u0_(u0), T_(T), dim_(x0.dim()), m_(m), dt_(dt), layers_(layer_count(T, dt))
    {
        if (m < 1) throw Error(ErrorKind::invalid_input, "grid needs m >= 1");
        nodes_ = static_cast<std::size_t>(m);
        if (dim_ == 2) nodes_ *= static_cast<std::size_t>(m);
        values_.assign(nodes_ * static_cast<std::size_t>(layers_), unreachable);
    }

    const TorusPoint& x0() const noexcept { return x0_; }
    double u0() const noexcept { return u0_; }
    double horizon() const noexcept { return T_; }
    int dim() const noexcept { return dim_; }
    int m() const noexcept { return m_; }
    double dt() const noexcept { return dt_; }
    int layers() const noexcept { return layers_; }
    std::size_t nodes() const noexcept { return nodes_; }
    double spacing() const noexcept { return 1.0 / m_; }
    static constexpr const char* interpolation() { return "multilinear-x/linear-t"; }

    double layer_time(int k) const noexcept { return k == layers_ ? T_ : k * dt_; }

    /// Values of layer k (1-based).
    std::span<double> layer(int k) { return {values_.data() + (k - 1) * nodes_, nodes_}; }
    std::span<const double> layer(int k) const { return {values_.data() + (k - 1) * nodes_, nodes_}; }

    double& at(int k, std::size_t node) { return values_[(k - 1) * nodes_ + node]; }
    double at(int k, std::size_t node) const { return values_[(k - 1) * nodes_ + node]; }

    const std::vector<double>& values() const noexcept { return values_; }

    TorusPoint node_point(std::size_t flat) const
    {
        if (dim_ == 1) return TorusPoint{static_cast<double>(flat) / m_};
        return TorusPoint{static_cast<double>(flat / m_) / m_, static_cast<double>(flat % m_) / m_};
    }

    /// Nearest grid node of a point (ties to the lower index).
    std::size_t nearest_node(const TorusPoint& x) const
    {
        auto axis = [this](double c) {
            long i = std::lround(c * m_);
            return static_cast<std::size_t>(((i % m_) + m_) % m_);
        };
        if (dim_ == 1) return axis(x[0]);
        return axis(x[0]) * m_ + axis(x[1]);
    }

    /// Layer index of time t, or -1 when t is not a layer time.
    int layer_of(double t) const noexcept
    {
        const double k = std::round(t / dt_);
        if (k < 1.0 || k > layers_ || std::abs(k * dt_ - t) > 1e-9 * std::max(1.0, t)) return -1;
        return static_cast<int>(k);
    }

    /// Multilinear interpolation on layer k; any unreachable corner with positive weight
    /// makes the result unreachable.
    double interpolate_layer(int k, const TorusPoint& x) const
    {
        const auto values = layer(k);
        double base_pos[max_dim]{};
        long base[max_dim]{};
        double frac[max_dim]{};
        for (int a = 0; a < dim_; ++a) {
            base_pos[a] = x[a] * m_;
            base[a] = static_cast<long>(std::floor(base_pos[a]));
            frac[a] = base_pos[a] - base[a];
            // snap round-off around grid nodes so an unreachable neighbour is not picked up
            if (frac[a] < 1e-10) {
                frac[a] = 0.0;
            } else if (frac[a] > 1.0 - 1e-10) {
                frac[a] = 0.0;
                base[a] += 1;
            }
        }
        auto idx = [this](long i) { return static_cast<std::size_t>(((i % m_) + m_) % m_); };
        double acc = 0.0;
        if (dim_ == 1) {
            for (int c = 0; c < 2; ++c) {
                const double w = c ? frac[0] : 1.0 - frac[0];
                if (w == 0.0) continue;
                const double v = values[idx(base[0] + c)];
                if (!std::isfinite(v)) return unreachable;
                acc += w * v;
            }
            return acc;
        }
        for (int c0 = 0; c0 < 2; ++c0) {
            const double w0 = c0 ? frac[0] : 1.0 - frac[0];
            if (w0 == 0.0) continue;
            for (int c1 = 0; c1 < 2; ++c1) {
                const double w1 = c1 ? frac[1] : 1.0 - frac[1];
                if (w1 == 0.0) continue;
                const double v = values[idx(base[0] + c0) * m_ + idx(base[1] + c1)];
                if (!std::isfinite(v)) return unreachable;
                acc += w0 * w1 * v;
            }
        }
        return acc;
    }

    /// h(x,t) for t in [dt, T].
    double value_at(const TorusPoint& x, double t) const
    {
        if (x.dim() != dim_) throw Error(ErrorKind::invalid_input, "dimension mismatch in value_at");
        const int k = layer_of(t);
        if (k > 0) return interpolate_layer(k, x);
        if (!(t >= dt_ * (1.0 - 1e-12)) || !(t <= T_ * (1.0 + 1e-12))) {
            throw Error(ErrorKind::invalid_input, "time outside (0,T] layers: " + std::to_string(t));
        }
        const int lo = std::clamp(static_cast<int>(std::floor(t / dt_)), 1, layers_ - 1);
        const double s = (t - lo * dt_) / dt_;
        const double a = interpolate_layer(lo, x);
        const double b = interpolate_layer(lo + 1, x);
        if (!std::isfinite(a) || !std::isfinite(b)) return unreachable;
        return (1.0 - s) * a + s * b;
    }

    double min_finite() const
    {
        double best = unreachable;
        for (double v : values_) {
            if (std::isfinite(v)) best = std::min(best, v);
        }
        return best;
    }

    double max_abs_finite() const
    {
        double best = 0.0;
        for (double v : values_) {
            if (std::isfinite(v)) best = std::max(best, std::abs(v));
        }
        return best;
    }

    /// Recursion that produced the field ("picard" or "semigroup"), with its stencil
    /// parameters; backtracking re-evaluates the same stencil.
    std::string scheme;
    double v_max = 0.0;
    int refinement = 1;

    /// Free-form provenance written to the sidecar (entry, params, ...).
    std::map<std::string, std::string> metadata;

private:
    TorusPoint x0_;
    double u0_ = 0.0;
    double T_ = 0.0;
    int dim_ = 1;
    int m_ = 0;
    double dt_ = 0.0;
    int layers_ = 0;
    std::size_t nodes_ = 0;
    std::vector<double> values_;
};

/// Largest |a - b| over nodes finite in both fields; fields must share the grid.
inline double sup_difference(const ActionField& a, const ActionField& b)
{
    if (a.values().size() != b.values().size()) {
        throw Error(ErrorKind::invalid_input, "fields live on different grids");
    }
    double d = 0.0;
    const auto& va = a.values();
    const auto& vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) {
        if (std::isfinite(va[i]) && std::isfinite(vb[i])) d = std::max(d, std::abs(va[i] - vb[i]));
    }
    return d;
}

/// Header "t,x_1[,x_2],h"; rows time-major, then lexicographic grid order.
inline void write_field_csv(std::ostream& os, const ActionField& f)
{
    os << "t,x_1" << (f.dim() == 2 ? ",x_2" : "") << ",h\n";
    const auto old = os.precision(17);
    for (int k = 1; k <= f.layers(); ++k) {
        const double t = f.layer_time(k);
        for (std::size_t n = 0; n < f.nodes(); ++n) {
            const TorusPoint x = f.node_point(n);
            os << t << "," << x[0];
            if (f.dim() == 2) os << "," << x[1];
            os << "," << f.at(k, n) << "\n";
        }
    }
    os.precision(old);
}

inline std::string format_real(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string format_point(std::span<const double> c)
{
    std::string s;
    for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + format_real(c[i]);
    return s;
}

/// key=value sidecar describing the field grid plus its metadata.
inline void write_field_sidecar(std::ostream& os, const ActionField& f)
{
    std::map<std::string, std::string> kv = f.metadata;
    kv["x0"] = format_point(f.x0().coords());
    kv["u0"] = format_real(f.u0());
    kv["T"] = format_real(f.horizon());
    kv["m"] = std::to_string(f.m());
    kv["dt"] = format_real(f.dt());
    kv["dim"] = std::to_string(f.dim());
    kv["interpolation"] = ActionField::interpolation();
    kv["scheme"] = f.scheme;
    kv["v_max"] = format_real(f.v_max);
    kv["refinement"] = std::to_string(f.refinement);
    for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
}

} // namespace contact_action
