#pragma once

#include "mpmgs/mat3.hpp"
#include "mpmgs/vec3.hpp"

namespace mpmgs {

struct Svd3 {
    Mat3 u;
    Vec3 sigma;
    Mat3 v;
};

/// Singular value decomposition m = u * diag(sigma) * v^T with the rotation
/// convention det(u) = det(v) = +1. Singular values are sorted by descending
/// absolute value; a reflection in the input is absorbed by allowing the last
/// singular value to be negative.
Svd3 svd3(const Mat3& m);

struct PolarDecomposition {
    Mat3 r;  // proper rotation
    Mat3 s;  // symmetric positive-definite
};

/// Polar decomposition f = r * s. Throws SingularInput when det(f) is below
/// the degeneracy threshold (1e-10).
PolarDecomposition polar_decompose(const Mat3& f);

/// Elementwise natural logarithm. Throws NonPositiveSingularValue on
/// entries <= 0.
Vec3 diag_log(const Vec3& sigma);

/// Elementwise exponential.
Vec3 diag_exp(const Vec3& sigma);

}  // namespace mpmgs
