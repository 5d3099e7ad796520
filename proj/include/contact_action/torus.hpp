#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <span>
#include <string>

#include "error.hpp"

namespace contact_action {

inline constexpr int max_dim = 2;

inline void check_dim(int dim)
{
    if (dim < 1 || dim > max_dim) {
        throw Error(ErrorKind::invalid_input, "dimension must be 1 or 2, got " + std::to_string(dim));
    }
}

/// Vector in a fiber of T^n: used both as a velocity and as a momentum.
class FiberVector
{
public:
    FiberVector() = default;

    explicit FiberVector(int dim) : dim_(dim) { check_dim(dim); }

    FiberVector(std::initializer_list<double> values) : dim_(static_cast<int>(values.size()))
    {
        check_dim(dim_);
        int i = 0;
        for (double v : values) c_[i++] = v;
    }

    explicit FiberVector(std::span<const double> values) : dim_(static_cast<int>(values.size()))
    {
        check_dim(dim_);
        for (int i = 0; i < dim_; ++i) c_[i] = values[i];
    }

    static FiberVector filled(int dim, double value)
    {
        FiberVector v(dim);
        for (int i = 0; i < dim; ++i) v.c_[i] = value;
        return v;
    }

    int dim() const noexcept { return dim_; }
    double operator[](int i) const noexcept { return c_[i]; }
    double& operator[](int i) noexcept { return c_[i]; }
    std::span<const double> components() const noexcept { return {c_.data(), static_cast<size_t>(dim_)}; }

    double squared_norm() const noexcept
    {
        double s = 0.0;
        for (int i = 0; i < dim_; ++i) s += c_[i] * c_[i];
        return s;
    }
    double norm() const noexcept { return std::sqrt(squared_norm()); }

    bool is_finite() const noexcept
    {
        for (int i = 0; i < dim_; ++i) {
            if (!std::isfinite(c_[i])) return false;
        }
        return true;
    }

    FiberVector& operator+=(const FiberVector& o) noexcept
    {
        for (int i = 0; i < dim_; ++i) c_[i] += o.c_[i];
        return *this;
    }
    FiberVector& operator-=(const FiberVector& o) noexcept
    {
        for (int i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
        return *this;
    }
    FiberVector& operator*=(double s) noexcept
    {
        for (int i = 0; i < dim_; ++i) c_[i] *= s;
        return *this;
    }

    friend FiberVector operator+(FiberVector a, const FiberVector& b) noexcept { return a += b; }
    friend FiberVector operator-(FiberVector a, const FiberVector& b) noexcept { return a -= b; }
    friend FiberVector operator*(FiberVector a, double s) noexcept { return a *= s; }
    friend FiberVector operator*(double s, FiberVector a) noexcept { return a *= s; }
    friend FiberVector operator-(FiberVector a) noexcept { return a *= -1.0; }
    friend bool operator==(const FiberVector& a, const FiberVector& b) noexcept
    {
        if (a.dim_ != b.dim_) return false;
        for (int i = 0; i < a.dim_; ++i) {
            if (a.c_[i] != b.c_[i]) return false;
        }
        return true;
    }

private:
    std::array<double, max_dim> c_{};
    int dim_ = 1;
};

inline double dot(const FiberVector& a, const FiberVector& b) noexcept
{
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
    return s;
}

/// Point of the flat torus R^n / Z^n, every coordinate kept in [0,1).
class TorusPoint
{
public:
    TorusPoint() = default;

    /// Wraps the given coordinates.
    TorusPoint(std::initializer_list<double> raw);
    explicit TorusPoint(std::span<const double> raw);
    explicit TorusPoint(const FiberVector& raw) : TorusPoint(raw.components()) {}

    static TorusPoint origin(int dim)
    {
        check_dim(dim);
        TorusPoint p;
        p.dim_ = dim;
        return p;
    }

    int dim() const noexcept { return dim_; }
    double operator[](int i) const noexcept { return c_[i]; }
    std::span<const double> coords() const noexcept { return {c_.data(), static_cast<size_t>(dim_)}; }

    /// Lift to R^n using the representative in [0,1)^n.
    FiberVector lift() const { return FiberVector(coords()); }

    friend bool operator==(const TorusPoint& a, const TorusPoint& b) noexcept
    {
        if (a.dim_ != b.dim_) return false;
        for (int i = 0; i < a.dim_; ++i) {
            if (a.c_[i] != b.c_[i]) return false;
        }
        return true;
    }

private:
    std::array<double, max_dim> c_{};
    int dim_ = 1;
};

/// Reduces one real coordinate mod 1 into [0,1).
inline double wrap_coordinate(double x)
{
    if (!std::isfinite(x)) {
        throw Error(ErrorKind::invalid_input, "non-finite coordinate");
    }
    double r = x - std::floor(x);
    // x slightly below an integer can round up to exactly 1
    if (r >= 1.0) r = 0.0;
    return r;
}

inline TorusPoint::TorusPoint(std::span<const double> raw) : dim_(static_cast<int>(raw.size()))
{
    check_dim(dim_);
    for (int i = 0; i < dim_; ++i) c_[i] = wrap_coordinate(raw[i]);
}

inline TorusPoint::TorusPoint(std::initializer_list<double> raw)
    : TorusPoint(std::span<const double>(raw.begin(), raw.size()))
{}

inline TorusPoint wrap(std::span<const double> raw) { return TorusPoint(raw); }
inline TorusPoint wrap(const FiberVector& raw) { return TorusPoint(raw); }

/// Translate a point by a fiber vector.
inline TorusPoint translate(const TorusPoint& a, const FiberVector& d)
{
    if (a.dim() != d.dim()) {
        throw Error(ErrorKind::invalid_input, "dimension mismatch in translate");
    }
    return wrap(a.lift() + d);
}

/// Representative of b - a with every component in [-1/2, 1/2).
inline FiberVector displacement(const TorusPoint& a, const TorusPoint& b)
{
    if (a.dim() != b.dim()) {
        throw Error(ErrorKind::invalid_input, "dimension mismatch in displacement");
    }
    FiberVector d(a.dim());
    for (int i = 0; i < a.dim(); ++i) {
        const double raw = b[i] - a[i];
        double r = raw - std::floor(raw + 0.5);
        if (r >= 0.5) r -= 1.0;
        d[i] = r;
    }
    return d;
}

inline double distance(const TorusPoint& a, const TorusPoint& b) { return displacement(a, b).norm(); }

/// Point halfway along the shortest segment from a to b.
inline TorusPoint midpoint(const TorusPoint& a, const TorusPoint& b)
{
    return translate(a, 0.5 * displacement(a, b));
}

inline double torus_diameter(int dim) { return 0.5 * std::sqrt(static_cast<double>(dim)); }

} // namespace contact_action
