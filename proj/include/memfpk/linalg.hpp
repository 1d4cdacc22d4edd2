#pragma once

// Small fixed-size linear algebra for two-dimensional state spaces.

#include <array>
#include <cmath>

namespace memfpk {

using Vec2 = std::array<double, 2>;

/// Row-major 2x2 matrix.
struct Mat2 {
    std::array<double, 4> m{0.0, 0.0, 0.0, 0.0};

    constexpr Mat2() = default;
    constexpr Mat2(double a, double b, double c, double d) : m{a, b, c, d} {}

    static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Mat2 diag(double a, double d) { return {a, 0.0, 0.0, d}; }

    constexpr double& operator()(int i, int j) { return m[2 * i + j]; }
    constexpr double operator()(int i, int j) const { return m[2 * i + j]; }

    constexpr double trace() const { return m[0] + m[3]; }
    constexpr double det() const { return m[0] * m[3] - m[1] * m[2]; }
    constexpr Mat2 transpose() const { return {m[0], m[2], m[1], m[3]}; }
    constexpr Vec2 col(int j) const { return {m[j], m[2 + j]}; }
};

constexpr Mat2 operator+(const Mat2& a, const Mat2& b) {
    return {a.m[0] + b.m[0], a.m[1] + b.m[1], a.m[2] + b.m[2], a.m[3] + b.m[3]};
}
constexpr Mat2 operator-(const Mat2& a, const Mat2& b) {
    return {a.m[0] - b.m[0], a.m[1] - b.m[1], a.m[2] - b.m[2], a.m[3] - b.m[3]};
}
constexpr Mat2 operator*(double s, const Mat2& a) {
    return {s * a.m[0], s * a.m[1], s * a.m[2], s * a.m[3]};
}
constexpr Mat2 operator*(const Mat2& a, const Mat2& b) {
    return {a.m[0] * b.m[0] + a.m[1] * b.m[2], a.m[0] * b.m[1] + a.m[1] * b.m[3],
            a.m[2] * b.m[0] + a.m[3] * b.m[2], a.m[2] * b.m[1] + a.m[3] * b.m[3]};
}
constexpr Vec2 operator*(const Mat2& a, const Vec2& v) {
    return {a.m[0] * v[0] + a.m[1] * v[1], a.m[2] * v[0] + a.m[3] * v[1]};
}

constexpr Vec2 operator+(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }
constexpr Vec2 operator-(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }
constexpr Vec2 operator*(double s, const Vec2& a) { return {s * a[0], s * a[1]}; }

/// Outer product a b^T.
constexpr Mat2 outer(const Vec2& a, const Vec2& b) {
    return {a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]};
}

inline double max_abs(const Mat2& a) {
    double r = 0.0;
    for (double x : a.m) r = std::fmax(r, std::fabs(x));
    return r;
}

inline bool all_finite(const Mat2& a) {
    for (double x : a.m)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Vec2& v) { return std::isfinite(v[0]) && std::isfinite(v[1]); }

/// Closed-form exponential of a 2x2 matrix.
///
/// With s = tr(M)/2 and B = M - sI we have B^2 = q^2 I, q^2 = s^2 - det(M),
/// so exp(M) = e^s [C(q^2) I + S(q^2) B] where C, S are cosh(q), sinh(q)/q
/// (or cos, sin/omega for q^2 < 0). Near q^2 = 0 the Taylor series is used,
/// which also covers the defective (repeated eigenvalue) case.
inline Mat2 expm(const Mat2& a) {
    const double s = 0.5 * a.trace();
    const Mat2 b = a - Mat2::diag(s, s);
    const double q2 = s * s - a.det();
    double c = 0.0;
    double sh = 0.0;
    if (std::fabs(q2) < 1e-4) {
        const double q4 = q2 * q2;
        const double q6 = q4 * q2;
        const double q8 = q4 * q4;
        c = 1.0 + q2 / 2.0 + q4 / 24.0 + q6 / 720.0 + q8 / 40320.0;
        sh = 1.0 + q2 / 6.0 + q4 / 120.0 + q6 / 5040.0 + q8 / 362880.0;
    } else if (q2 > 0.0) {
        const double q = std::sqrt(q2);
        c = std::cosh(q);
        sh = std::sinh(q) / q;
    } else {
        const double w = std::sqrt(-q2);
        c = std::cos(w);
        sh = std::sin(w) / w;
    }
    const double es = std::exp(s);
    return es * (Mat2::diag(c, c) + sh * b);
}

}  // namespace memfpk
