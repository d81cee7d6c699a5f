#include "mpmgs/svd3.hpp"

#include <algorithm>
#include <cmath>

#include "mpmgs/errors.hpp"

namespace mpmgs {

namespace {

constexpr double kDegenerateDet = 1e-10;

// Rotate columns p and q of a by the Givens rotation (c, s).
inline void rotate_cols(Mat3& a, int p, int q, double c, double s) {
    for (int k = 0; k < 3; ++k) {
        const double ap = a(k, p), aq = a(k, q);
        a(k, p) = c * ap - s * aq;
        a(k, q) = s * ap + c * aq;
    }
}

// Unit vector orthogonal to u (u assumed unit length).
inline Vec3 any_orthonormal(const Vec3& u) {
    const Vec3 probe = std::fabs(u.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    return u.cross(probe).normalized();
}

}  // namespace

Svd3 svd3(const Mat3& m) {
    // One-sided (Hestenes) Jacobi: orthogonalize the columns of a working
    // copy with right-hand Givens rotations accumulated into v.
    Mat3 a = m;
    Mat3 v = Mat3::identity();
    const double scale = std::max(a.max_abs(), 1e-300);

    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const Vec3 cp = a.col(p), cq = a.col(q);
                const double alpha = cp.squared_norm();
                const double beta = cq.squared_norm();
                const double gamma = cp.dot(cq);
                if (std::fabs(gamma) <= 1e-16 * scale * scale) continue;
                off = std::max(off, std::fabs(gamma) / (scale * scale));
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0 ? 1.0 : -1.0)
                               / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate_cols(a, p, q, c, s);
                rotate_cols(v, p, q, c, s);
            }
        }
        if (off < 1e-15) break;
    }

    Vec3 sigma{a.col(0).norm(), a.col(1).norm(), a.col(2).norm()};

    // Sort singular values descending, permuting columns of a and v alike.
    int order[3] = {0, 1, 2};
    std::sort(order, order + 3, [&](int i, int j) { return sigma[i] > sigma[j]; });
    Mat3 as, vs;
    Vec3 ss;
    for (int i = 0; i < 3; ++i) {
        as.set_col(i, a.col(order[i]));
        vs.set_col(i, v.col(order[i]));
        ss[i] = sigma[order[i]];
    }

    // Columns of u: normalized columns of the rotated copy; complete an
    // orthonormal basis where singular values vanish.
    Mat3 u;
    const double tiny = 1e-14 * std::max(ss[0], 1e-300);
    Vec3 u0 = ss[0] > tiny ? as.col(0) / ss[0] : Vec3{1, 0, 0};
    Vec3 u1 = ss[1] > tiny ? as.col(1) / ss[1] : any_orthonormal(u0);
    Vec3 u2 = ss[2] > tiny ? as.col(2) / ss[2] : u0.cross(u1);
    u.set_col(0, u0);
    u.set_col(1, u1);
    u.set_col(2, u2);

    // Enforce det(u) = det(v) = +1, pushing any reflection into the smallest
    // singular value.
    if (u.determinant() < 0) {
        u.set_col(2, -u.col(2));
        ss[2] = -ss[2];
    }
    if (vs.determinant() < 0) {
        vs.set_col(2, -vs.col(2));
        ss[2] = -ss[2];
    }
    return {u, ss, vs};
}

PolarDecomposition polar_decompose(const Mat3& f) {
    if (!(f.determinant() > kDegenerateDet))
        throw SingularInput("polar_decompose: determinant at or below degeneracy threshold");
    const Svd3 d = svd3(f);
    const Mat3 r = d.u * d.v.transposed();
    const Mat3 s = d.v * Mat3::diag(d.sigma) * d.v.transposed();
    return {r, s.symmetrized()};
}

Vec3 diag_log(const Vec3& sigma) {
    if (!(sigma.x > 0.0) || !(sigma.y > 0.0) || !(sigma.z > 0.0))
        throw NonPositiveSingularValue("diag_log: entries must be positive");
    return {std::log(sigma.x), std::log(sigma.y), std::log(sigma.z)};
}

Vec3 diag_exp(const Vec3& sigma) {
    return {std::exp(sigma.x), std::exp(sigma.y), std::exp(sigma.z)};
}

}  // namespace mpmgs
