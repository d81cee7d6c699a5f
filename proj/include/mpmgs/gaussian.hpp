#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpmgs/mat3.hpp"
#include "mpmgs/mpm.hpp"
#include "mpmgs/vec3.hpp"

namespace mpmgs {

/// A 3D Gaussian kernel: center, covariance, opacity, and an opaque color
/// payload that deformation never touches.
struct GaussianKernel {
    Vec3 center;
    Mat3 covariance = Mat3::identity();
    double opacity = 1.0;
    std::vector<float> payload;
};

/// Covariance of a deformed kernel: F sigma F^T, explicitly symmetrized.
Mat3 deform_covariance(const Mat3& sigma, const Mat3& f);

/// View direction update d' = R^T d with F = R S from the polar
/// decomposition. Throws SingularInput on degenerate F.
Vec3 rotate_view_dir(const Vec3& d, const Mat3& f);

/// One decoded frame: deformed kernel centers and covariances.
struct FrameKernels {
    std::vector<Vec3> centers;
    std::vector<Mat3> covariances;
};

struct FrameData {
    std::uint32_t version = 1;
    std::vector<FrameKernels> frames;
    std::size_t kernel_count = 0;
};

/// Writes the binary frame file: little-endian header
/// (magic "GKF1", u32 version, u32 frame count, u32 kernel count), then per
/// frame per kernel 9 float32 values (center x,y,z; covariance upper
/// triangle xx,xy,xz,yy,yz,zz). Kernel covariances are deformed per frame by
/// the trajectory's deformation gradients. Throws ShapeMismatch when the
/// kernel count differs from the trajectory's particle count; IoError on
/// write failure.
void export_frames(const Trajectory& trajectory, const std::vector<GaussianKernel>& kernels,
                   const std::string& path);

/// Reads a frame file back. Throws ParseError on malformed content and
/// IoError when the file cannot be opened.
FrameData read_frames(const std::string& path);

/// 8-bit grayscale image, row-major, row 0 at the top.
struct Image {
    int width = 0, height = 0;
    std::vector<std::uint8_t> pixels;
};

/// Orthographic preview along a coordinate axis (0 = x, 1 = y, 2 = z):
/// opacity-weighted anisotropic footprints accumulated over the unit domain,
/// truncated at 3 sigma. Deterministic.
Image splat_preview(const FrameKernels& frame, const std::vector<double>& opacities, int axis,
                    int resolution);

void write_pgm(const Image& img, const std::string& path);  // throws IoError

}  // namespace mpmgs
