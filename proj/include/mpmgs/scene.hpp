#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpmgs/boundary.hpp"
#include "mpmgs/gaussian.hpp"
#include "mpmgs/materials.hpp"
#include "mpmgs/mpm.hpp"

namespace mpmgs {

struct ParticleSource {
    enum class Kind { Box, Sphere, PointFile };
    Kind kind = Kind::Box;
    Vec3 box_min, box_max;          // Box
    Vec3 center;                    // Sphere
    double radius = 0.0;            // Sphere
    std::string path;               // PointFile
    double opacity_threshold = 0.0; // PointFile: drop kernels below this opacity
    double density = 1000.0;        // kg/m^3
    Vec3 velocity;                  // initial velocity (m/s)
    int material = 0;               // index into SceneConfig::materials
};

/// A material slot: either a concrete spec or the "learnable" marker that
/// the estimation layer resolves.
struct MaterialEntry {
    bool learnable = false;
    MaterialSpec spec;
};

/// Scene configuration. Defaults are the reference constants: unit domain,
/// 25 grid cells per axis (dx = 0.04), dt = 3e-4 s, gravity (0,0,-9.8),
/// 150 frames sampled every 10 steps.
struct SceneConfig {
    Vec3 domain_min{0, 0, 0};
    Vec3 domain_max{1, 1, 1};
    int grid_resolution = 25;  // cells per axis
    double dt = 3e-4;
    Vec3 gravity{0, 0, -9.8};
    int frames = 150;
    int sample_every = 10;
    std::uint64_t seed = 1;
    std::vector<MaterialEntry> materials;
    std::vector<ParticleSource> sources;
    std::vector<BoundaryCondition> boundary_conditions;

    int total_steps() const { return frames * sample_every; }
};

/// Parses and fully validates a scene file (JSON; schema in docs/formats.md).
/// Throws ParseError (with position/field context) on malformed input and
/// ValidationError naming the violated invariant otherwise.
SceneConfig load_scene(const std::string& path);
SceneConfig scene_from_json_text(const std::string& text);
std::string scene_to_json_text(const SceneConfig& config);

/// Invariant checks incl. the CFL guard dt * wavespeed <= 0.5 dx, with
/// wavespeed = sqrt((lambda + 2 mu) / density) per source.
void validate_scene(const SceneConfig& config);

struct SampledSource {
    std::vector<Vec3> positions;
    std::vector<double> masses;
    std::vector<double> volumes;
    std::vector<GaussianKernel> kernels;
};

/// Seeds 8 particles per occupied grid cell (cell centers inside the
/// geometry), jittered deterministically from `seed`; mass = density (dx/2)^3.
/// Throws EmptySource when the geometry covers no cell.
SampledSource sample_shape(const ParticleSource& source, const GridField& grid,
                           std::uint64_t seed);

struct PointCloud {
    std::vector<Vec3> positions;
    bool has_covariance = false;
    std::vector<Mat3> covariances;   // empty unless has_covariance
    std::vector<double> opacities;   // empty means all 1
    std::vector<std::vector<float>> payload;  // opaque extra per-point data
};

/// Reads an ASCII point file ("x y z [sx sy sz qw qx qy qz opacity]" per
/// line) or a PLY file (ascii / binary_little_endian vertex subset with
/// the 3DGS field conventions). Throws ParseError / EmptyCloud.
PointCloud load_points(const std::string& path);

/// Uniformly rescales the cloud into the domain box with a 10% margin,
/// preserving aspect ratio; covariances pick up the squared scale.
/// Idempotent on already-normalized clouds.
void normalize_points(PointCloud& cloud, const Vec3& domain_min, const Vec3& domain_max);

struct SceneRuntime {
    SimInput sim;
    std::vector<GaussianKernel> kernels;
    std::vector<int> particle_source;  // per particle: source index
    bool any_learnable = false;
};

/// Assembles the runnable simulation: grid, sampled particles with initial
/// velocities, material table, boundary set. With require_concrete_materials
/// set, any "learnable" slot raises ValidationError (learnable slots fall
/// back to default parameters otherwise, as placeholders for estimation).
SceneRuntime build_runtime(const SceneConfig& config, bool require_concrete_materials);

}  // namespace mpmgs
