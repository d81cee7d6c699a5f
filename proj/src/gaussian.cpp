#include "mpmgs/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mpmgs/errors.hpp"
#include "mpmgs/svd3.hpp"

namespace mpmgs {

namespace {

constexpr char kMagic[4] = {'G', 'K', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8)
         | (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

float get_f32(std::istream& is) {
    const std::uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

Mat3 deform_covariance(const Mat3& sigma, const Mat3& f) {
    return (f * sigma * f.transposed()).symmetrized();
}

Vec3 rotate_view_dir(const Vec3& d, const Mat3& f) {
    const PolarDecomposition pd = polar_decompose(f);  // throws SingularInput
    return pd.r.transposed() * d;
}

void export_frames(const Trajectory& trajectory, const std::vector<GaussianKernel>& kernels,
                   const std::string& path) {
    if (kernels.size() != trajectory.particle_count)
        throw ShapeMismatch("export_frames: kernel count differs from trajectory particle count");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("export_frames: cannot open '" + path + "' for writing");

    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(trajectory.frames.size()));
    put_u32(os, static_cast<std::uint32_t>(kernels.size()));

    for (const TrajectoryFrame& fr : trajectory.frames) {
        for (std::size_t p = 0; p < kernels.size(); ++p) {
            const Vec3& c = fr.positions[p];
            const Mat3 cov = deform_covariance(kernels[p].covariance, fr.deformation[p]);
            put_f32(os, static_cast<float>(c.x));
            put_f32(os, static_cast<float>(c.y));
            put_f32(os, static_cast<float>(c.z));
            put_f32(os, static_cast<float>(cov(0, 0)));
            put_f32(os, static_cast<float>(cov(0, 1)));
            put_f32(os, static_cast<float>(cov(0, 2)));
            put_f32(os, static_cast<float>(cov(1, 1)));
            put_f32(os, static_cast<float>(cov(1, 2)));
            put_f32(os, static_cast<float>(cov(2, 2)));
        }
    }
    if (!os) throw IoError("export_frames: write to '" + path + "' failed");
}

FrameData read_frames(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read_frames: cannot open '" + path + "'");

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("read_frames: '" + path + "' is not a frame file (bad magic)");
    FrameData data;
    data.version = get_u32(is);
    if (data.version != kVersion)
        throw ParseError("read_frames: unsupported frame file version");
    const std::uint32_t frame_count = get_u32(is);
    const std::uint32_t kernel_count = get_u32(is);
    if (!is) throw ParseError("read_frames: truncated header");
    data.kernel_count = kernel_count;

    data.frames.resize(frame_count);
    for (std::uint32_t f = 0; f < frame_count; ++f) {
        FrameKernels& fk = data.frames[f];
        fk.centers.resize(kernel_count);
        fk.covariances.resize(kernel_count);
        for (std::uint32_t p = 0; p < kernel_count; ++p) {
            float vals[9];
            for (float& v : vals) v = get_f32(is);
            if (!is) throw ParseError("read_frames: truncated frame data");
            fk.centers[p] = Vec3(vals[0], vals[1], vals[2]);
            fk.covariances[p] = Mat3(vals[3], vals[4], vals[5],
                                     vals[4], vals[6], vals[7],
                                     vals[5], vals[7], vals[8]);
        }
    }
    return data;
}

Image splat_preview(const FrameKernels& frame, const std::vector<double>& opacities, int axis,
                    int resolution) {
    if (axis < 0 || axis > 2) throw ValidationError("splat_preview: axis must be 0, 1 or 2");
    if (resolution < 1) throw ValidationError("splat_preview: resolution must be positive");

    const int h = (axis + 1) % 3;  // horizontal image axis
    const int v = (axis + 2) % 3;  // vertical image axis
    std::vector<double> acc(static_cast<std::size_t>(resolution) * resolution, 0.0);

    for (std::size_t p = 0; p < frame.centers.size(); ++p) {
        const double alpha = p < opacities.size() ? opacities[p] : 1.0;
        if (alpha <= 0.0) continue;
        const Mat3& cov = frame.covariances[p];
        // 2x2 marginal of the projected Gaussian
        double a = cov(h, h), b = cov(h, v), c = cov(v, v);
        const double floor2 = 1e-12;  // keep the footprint at least a fraction of a pixel
        a = std::max(a, floor2);
        c = std::max(c, floor2);
        double det = a * c - b * b;
        if (det <= 0) {
            b = 0;
            det = a * c;
        }
        const double inv_a = c / det, inv_b = -b / det, inv_c = a / det;
        const double cx = frame.centers[p][h] * resolution - 0.5;
        const double cy = frame.centers[p][v] * resolution - 0.5;
        const double rx = 3.0 * std::sqrt(a) * resolution;
        const double ry = 3.0 * std::sqrt(c) * resolution;
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
        const int x1 = std::min(resolution - 1, static_cast<int>(std::ceil(cx + rx)));
        const int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
        const int y1 = std::min(resolution - 1, static_cast<int>(std::ceil(cy + ry)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dx = (x - cx) / resolution;
                const double dy = (y - cy) / resolution;
                const double q = inv_a * dx * dx + 2.0 * inv_b * dx * dy + inv_c * dy * dy;
                if (q > 9.0) continue;  // 3 sigma cutoff
                acc[static_cast<std::size_t>(resolution - 1 - y) * resolution + x]
                    += alpha * std::exp(-0.5 * q);
            }
        }
    }

    Image img;
    img.width = resolution;
    img.height = resolution;
    img.pixels.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i)
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::min(1.0, acc[i])));
    return img;
}

void write_pgm(const Image& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("write_pgm: cannot open '" + path + "' for writing");
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw IoError("write_pgm: write to '" + path + "' failed");
}

}  // namespace mpmgs
