#include "mpmgs/bench.hpp"

#include <sys/resource.h>

#include <chrono>
#include <cmath>

#include "mpmgs/errors.hpp"
#include "mpmgs/mpm.hpp"
#include "mpmgs/scene.hpp"

namespace mpmgs {

namespace {

double peak_rss_mb() {
    rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    return static_cast<double>(ru.ru_maxrss) / 1024.0;  // ru_maxrss is KiB on Linux
}

}  // namespace

BenchReport run_bench(std::size_t particles, int steps, int threads) {
    if (particles < 1) throw ValidationError("bench: particle count must be positive");
    if (steps < 1) throw ValidationError("bench: step count must be positive");

    // pick a grid that fits a cube of ceil(particles/8) cells inside the margins
    const std::size_t cells_needed = (particles + 7) / 8;
    const int side = static_cast<int>(std::ceil(std::cbrt(static_cast<double>(cells_needed))));
    const int resolution = std::max(25, side + 6);

    SceneConfig cfg;
    cfg.grid_resolution = resolution;
    MaterialEntry mat;
    cfg.materials.push_back(mat);
    const double dx = 1.0 / resolution;
    ParticleSource src;
    src.kind = ParticleSource::Kind::Box;
    const double lo = 3.0 * dx;
    src.box_min = Vec3::all(lo);
    src.box_max = Vec3::all(lo + side * dx);
    cfg.sources.push_back(src);
    BoundaryCondition ground;
    ground.kind = BoundaryCondition::Kind::GroundPlaneSticky;
    ground.height = 2.0 * dx;
    cfg.boundary_conditions.push_back(ground);

    SceneRuntime rt = build_runtime(cfg, true);
    // trim to the exact particle count
    ParticleState& st = rt.sim.initial;
    st.x.resize(particles);
    st.v.resize(particles);
    st.F.resize(particles);
    st.C.resize(particles);
    st.mass.resize(particles);
    st.volume.resize(particles);
    rt.sim.materials.particle_material.resize(particles);
    rt.sim.params.threads = threads;

    ParticleState state = rt.sim.initial;
    GridField grid = rt.sim.grid;
    StepContext ctx;

    const auto t0 = std::chrono::steady_clock::now();
    for (int s = 0; s < steps; ++s)
        mpm_step(state, grid, rt.sim.materials, rt.sim.boundaries, rt.sim.params,
                 s * rt.sim.params.dt, &ctx, nullptr, s);
    const auto t1 = std::chrono::steady_clock::now();

    BenchReport rep;
    rep.particles = particles;
    rep.steps = steps;
    rep.elapsed_seconds = std::chrono::duration<double>(t1 - t0).count();
    rep.peak_rss_mb = peak_rss_mb();
    rep.particle_steps_per_second =
        static_cast<double>(particles) * steps / std::max(rep.elapsed_seconds, 1e-12);
    return rep;
}

}  // namespace mpmgs
