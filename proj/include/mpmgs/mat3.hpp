#pragma once

#include <cmath>

#include "mpmgs/vec3.hpp"

namespace mpmgs {

/// 3x3 matrix of doubles, row-major.
struct Mat3 {
    double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

    constexpr Mat3() = default;
    constexpr Mat3(double a00, double a01, double a02,
                   double a10, double a11, double a12,
                   double a20, double a21, double a22)
        : m{{a00, a01, a02}, {a10, a11, a12}, {a20, a21, a22}} {}

    static constexpr Mat3 identity() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }
    static constexpr Mat3 zero() { return {}; }
    static constexpr Mat3 diag(const Vec3& d) { return {d.x, 0, 0, 0, d.y, 0, 0, 0, d.z}; }
    static constexpr Mat3 outer(const Vec3& a, const Vec3& b) {
        return {a.x * b.x, a.x * b.y, a.x * b.z,
                a.y * b.x, a.y * b.y, a.y * b.z,
                a.z * b.x, a.z * b.y, a.z * b.z};
    }

    constexpr double operator()(int r, int c) const { return m[r][c]; }
    double& operator()(int r, int c) { return m[r][c]; }

    constexpr Vec3 row(int r) const { return {m[r][0], m[r][1], m[r][2]}; }
    constexpr Vec3 col(int c) const { return {m[0][c], m[1][c], m[2][c]}; }
    void set_col(int c, const Vec3& v) { m[0][c] = v.x; m[1][c] = v.y; m[2][c] = v.z; }

    Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
        return r;
    }
    Mat3 operator-(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] - o.m[i][j];
        return r;
    }
    Mat3 operator*(double s) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] * s;
        return r;
    }
    Mat3& operator+=(const Mat3& o) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m[i][j] += o.m[i][j];
        return *this;
    }
    Mat3& operator*=(double s) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m[i][j] *= s;
        return *this;
    }

    Vec3 operator*(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j] + m[i][2] * o.m[2][j];
        return r;
    }

    constexpr Mat3 transposed() const {
        return {m[0][0], m[1][0], m[2][0],
                m[0][1], m[1][1], m[2][1],
                m[0][2], m[1][2], m[2][2]};
    }
    constexpr double trace() const { return m[0][0] + m[1][1] + m[2][2]; }
    constexpr double determinant() const {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
             - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
             + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    }
    /// Matrix of cofactors; equals det(M) * M^{-T} for invertible M.
    constexpr Mat3 cofactor() const {
        return {m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
                m[0][0] * m[1][1] - m[0][1] * m[1][0]};
    }
    Mat3 inverse() const { return cofactor().transposed() * (1.0 / determinant()); }
    /// det(M) * M^{-T}; well-defined even at det == 0.
    constexpr Mat3 inverse_transpose_times_det() const { return cofactor(); }

    double squared_frobenius() const {
        double s = 0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) s += m[i][j] * m[i][j];
        return s;
    }
    double frobenius_norm() const { return std::sqrt(squared_frobenius()); }
    double max_abs() const {
        double v = 0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) v = std::max(v, std::fabs(m[i][j]));
        return v;
    }
    bool finite() const {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (!std::isfinite(m[i][j])) return false;
        return true;
    }
    /// Exactly symmetric average (M + M^T)/2; the lower triangle mirrors the upper.
    Mat3 symmetrized() const {
        Mat3 r = *this;
        r.m[0][1] = r.m[1][0] = 0.5 * (m[0][1] + m[1][0]);
        r.m[0][2] = r.m[2][0] = 0.5 * (m[0][2] + m[2][0]);
        r.m[1][2] = r.m[2][1] = 0.5 * (m[1][2] + m[2][1]);
        return r;
    }

    bool operator==(const Mat3& o) const {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (m[i][j] != o.m[i][j]) return false;
        return true;
    }
};

inline Mat3 operator*(double s, const Mat3& a) { return a * s; }

}  // namespace mpmgs
