#include "mpmgs/mpm.hpp"

#include <cmath>
#include <cstring>

#include "mpmgs/elasticity.hpp"
#include "mpmgs/errors.hpp"
#include "mpmgs/parallel.hpp"
#include "mpmgs/plasticity.hpp"

namespace mpmgs {

namespace {

// Builds the stencil cache and the node bounding box it touches.
void build_stencils(const ParticleState& state, const GridField& grid,
                    std::vector<Stencil>& out, int threads, int box_lo[3], int box_hi[3]) {
    out.resize(state.size());
    parallel_for_chunks(state.size(), threads, [&](std::size_t b, std::size_t e, int) {
        for (std::size_t p = b; p < e; ++p) out[p] = bspline_stencil(state.x[p], grid);
    });
    for (int a = 0; a < 3; ++a) {
        box_lo[a] = grid.nodes_per_axis();
        box_hi[a] = -1;
    }
    for (const Stencil& s : out)
        for (int a = 0; a < 3; ++a) {
            box_lo[a] = std::min(box_lo[a], s.base[a]);
            box_hi[a] = std::max(box_hi[a], s.base[a] + 2);
        }
}

template <class Fn>
void for_each_active(const GridField& grid, Fn&& fn) {
    if (!grid.has_active()) return;
    for (int i = grid.active_lo[0]; i <= grid.active_hi[0]; ++i)
        for (int j = grid.active_lo[1]; j <= grid.active_hi[1]; ++j)
            for (int k = grid.active_lo[2]; k <= grid.active_hi[2]; ++k)
                fn(i, j, k, grid.node_index(i, j, k));
}

template <class T>
void clear_box(std::vector<T>& v, const GridField& grid) {
    for_each_active(grid, [&](int, int, int, std::size_t idx) { v[idx] = T{}; });
}

// Scatter pass with per-worker grid accumulation buffers merged in worker
// order; worker count 1 writes straight into the output arrays. All buffer
// traffic is bounded to the grid's active box.
template <class Accumulate>
void scatter_to_grid(std::size_t particle_count, const GridField& grid, int threads,
                     std::vector<double>* mass_out, std::vector<Vec3>& vec_out,
                     StepContext& ctx, Accumulate&& acc) {
    const std::size_t nodes = grid.node_count();
    const int t = std::max(1, std::min<int>(threads, static_cast<int>(particle_count ? particle_count : 1)));
    if (t <= 1) {
        acc(std::size_t{0}, particle_count, mass_out, &vec_out);
        return;
    }
    ctx.mass_buf.resize(t);
    ctx.vec_buf.resize(t);
    for (int w = 0; w < t; ++w) {
        if (mass_out && ctx.mass_buf[w].size() != nodes) ctx.mass_buf[w].assign(nodes, 0.0);
        if (ctx.vec_buf[w].size() != nodes) ctx.vec_buf[w].assign(nodes, Vec3{});
    }
    parallel_for_chunks(particle_count, t, [&](std::size_t b, std::size_t e, int w) {
        auto* mb = mass_out ? &ctx.mass_buf[w] : nullptr;
        if (mb) clear_box(*mb, grid);
        clear_box(ctx.vec_buf[w], grid);
        acc(b, e, mb, &ctx.vec_buf[w]);
    });
    // fixed merge order: worker 0, 1, ...
    for (int w = 0; w < t; ++w)
        for_each_active(grid, [&](int, int, int, std::size_t idx) {
            if (mass_out) (*mass_out)[idx] += ctx.mass_buf[w][idx];
            vec_out[idx] += ctx.vec_buf[w][idx];
        });
}

void p2g_impl(const ParticleState& state, const std::vector<Stencil>& st, const int box_lo[3],
              const int box_hi[3], GridField& grid, StepContext& ctx, int threads) {
    grid.clear_active();
    for (int a = 0; a < 3; ++a) {
        grid.active_lo[a] = box_lo[a];
        grid.active_hi[a] = box_hi[a];
    }
    scatter_to_grid(state.size(), grid, threads, &grid.mass, grid.momentum, ctx,
                    [&](std::size_t b, std::size_t e, std::vector<double>* mass,
                        std::vector<Vec3>* mom) {
        for (std::size_t p = b; p < e; ++p) {
            const Stencil& s = st[p];
            const double mp = state.mass[p];
            const Vec3 vp = state.v[p];
            const Mat3& cp = state.C[p];
            const Vec3 xp = state.x[p];
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    const double wij = s.w[0][i] * s.w[1][j];
                    for (int k = 0; k < 3; ++k) {
                        const double w = wij * s.w[2][k];
                        const std::size_t n =
                            grid.node_index(s.base[0] + i, s.base[1] + j, s.base[2] + k);
                        const Vec3 dpos =
                            grid.node_position(s.base[0] + i, s.base[1] + j, s.base[2] + k) - xp;
                        (*mass)[n] += w * mp;
                        (*mom)[n] += (vp + cp * dpos) * (w * mp);
                    }
                }
            }
        }
    });
}

void accumulate_stress_forces(const ParticleState& state, const std::vector<Stencil>& st,
                              const std::vector<Mat3>& stresses, const GridField& grid,
                              std::vector<Vec3>& force, StepContext& ctx, int threads) {
    scatter_to_grid(state.size(), grid, threads, nullptr, force, ctx,
                    [&](std::size_t b, std::size_t e, std::vector<double>*,
                        std::vector<Vec3>* f) {
        for (std::size_t p = b; p < e; ++p) {
            const Stencil& s = st[p];
            const Mat3 tau_v = stresses[p] * state.volume[p];
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    for (int k = 0; k < 3; ++k) {
                        const Vec3 grad{s.dw[0][i] * s.w[1][j] * s.w[2][k],
                                        s.w[0][i] * s.dw[1][j] * s.w[2][k],
                                        s.w[0][i] * s.w[1][j] * s.dw[2][k]};
                        const std::size_t n =
                            grid.node_index(s.base[0] + i, s.base[1] + j, s.base[2] + k);
                        (*f)[n] -= tau_v * grad;
                    }
                }
            }
        }
    });
}

void grid_update_impl(GridField& grid, const ParticleState& state, const std::vector<Stencil>& st,
                      const std::vector<Mat3>& stresses, const BoundarySet& bc,
                      const StepParams& params, double time, StepContext& ctx, int threads) {
    const std::size_t nodes = grid.node_count();
    if (ctx.force.size() != nodes) ctx.force.assign(nodes, Vec3{});
    clear_box(ctx.force, grid);
    accumulate_stress_forces(state, st, stresses, grid, ctx.force, ctx, threads);

    for_each_active(grid, [&](int, int, int, std::size_t idx) {
        const double m = grid.mass[idx];
        grid.velocity[idx] =
            m < params.node_mass_epsilon
                ? Vec3{}
                : grid.momentum[idx] / m + (ctx.force[idx] / m + params.gravity) * params.dt;
    });

    // force-type boundary conditions first
    for (const BoundaryCondition& c : bc.items) {
        if (c.kind != BoundaryCondition::Kind::ConstantForce || !c.active_at(time)) continue;
        double region_mass = 0.0;
        for_each_active(grid, [&](int i, int j, int k, std::size_t idx) {
            if (grid.mass[idx] >= params.node_mass_epsilon
                && c.contains(grid.node_position(i, j, k)))
                region_mass += grid.mass[idx];
        });
        if (region_mass <= 0.0) continue;
        const Vec3 dv = c.vector * (params.dt / region_mass);
        for_each_active(grid, [&](int i, int j, int k, std::size_t idx) {
            if (grid.mass[idx] >= params.node_mass_epsilon
                && c.contains(grid.node_position(i, j, k)))
                grid.velocity[idx] += dv;
        });
    }

    // velocity constraints last (no-ops on the zero velocities outside the box)
    for (const BoundaryCondition& c : bc.items) {
        if (!c.active_at(time)) continue;
        switch (c.kind) {
            case BoundaryCondition::Kind::GroundPlaneSticky:
                for_each_active(grid, [&](int i, int j, int k, std::size_t idx) {
                    if (grid.node_position(i, j, k).z <= c.height) grid.velocity[idx] = Vec3{};
                });
                break;
            case BoundaryCondition::Kind::GroundPlaneSlip:
                // slip: zero the normal component, keep the tangential ones
                for_each_active(grid, [&](int i, int j, int k, std::size_t idx) {
                    if (grid.node_position(i, j, k).z <= c.height) grid.velocity[idx].z = 0;
                });
                break;
            case BoundaryCondition::Kind::DomainWalls: {
                const int margin = c.margin_cells;
                for_each_active(grid, [&](int i, int j, int k, std::size_t idx) {
                    const bool lo_i = i < margin, hi_i = i > grid.cells - margin;
                    const bool lo_j = j < margin, hi_j = j > grid.cells - margin;
                    const bool lo_k = k < margin, hi_k = k > grid.cells - margin;
                    if (!(lo_i || hi_i || lo_j || hi_j || lo_k || hi_k)) return;
                    Vec3& v = grid.velocity[idx];
                    if (c.sticky) {
                        v = Vec3{};
                        return;
                    }
                    if (lo_i || hi_i) v.x = 0;
                    if (lo_j || hi_j) v.y = 0;
                    if (lo_k || hi_k) v.z = 0;
                });
                break;
            }
            default:
                break;
        }
    }
}

void clamp_to_margin(Vec3& x, const GridField& grid, int margin_cells) {
    const double lo = margin_cells * grid.dx;
    const Vec3 mn = grid.domain_min() + Vec3::all(lo);
    const Vec3 mx = grid.domain_max() - Vec3::all(lo);
    x.x = std::min(std::max(x.x, mn.x), mx.x);
    x.y = std::min(std::max(x.y, mn.y), mx.y);
    x.z = std::min(std::max(x.z, mn.z), mx.z);
}

void g2p_impl(const GridField& grid, const std::vector<Stencil>& st, ParticleState& state,
              const StepParams& params, int threads) {
    const double c_factor = 4.0 / (grid.dx * grid.dx);  // 12 / (dx^2 (b+1)), b = 2
    parallel_for_chunks(state.size(), threads, [&](std::size_t b, std::size_t e, int) {
        for (std::size_t p = b; p < e; ++p) {
            const Stencil& s = st[p];
            const Vec3 xp = state.x[p];
            Vec3 v{};
            Mat3 c = Mat3::zero();
            Mat3 grad_v = Mat3::zero();
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    for (int k = 0; k < 3; ++k) {
                        const double w = s.w[0][i] * s.w[1][j] * s.w[2][k];
                        const Vec3 grad{s.dw[0][i] * s.w[1][j] * s.w[2][k],
                                        s.w[0][i] * s.dw[1][j] * s.w[2][k],
                                        s.w[0][i] * s.w[1][j] * s.dw[2][k]};
                        const Vec3 vi =
                            grid.velocity[grid.node_index(s.base[0] + i, s.base[1] + j,
                                                          s.base[2] + k)];
                        const Vec3 dpos =
                            grid.node_position(s.base[0] + i, s.base[1] + j, s.base[2] + k) - xp;
                        v += vi * w;
                        c += Mat3::outer(vi * w, dpos);
                        grad_v += Mat3::outer(vi, grad);
                    }
                }
            }
            state.v[p] = v;
            state.x[p] = xp + v * params.dt;
            clamp_to_margin(state.x[p], grid, params.clamp_margin_cells);
            state.C[p] = c * c_factor;
            state.F[p] = (Mat3::identity() + grad_v * params.dt) * state.F[p];
        }
    });
}

void apply_particle_boundaries(ParticleState& state, const BoundarySet& bc,
                               const GridField& grid, const StepParams& params, double time) {
    for (const BoundaryCondition& c : bc.items) {
        if (c.kind != BoundaryCondition::Kind::Impulse) continue;
        // one-shot: fires at the unique step whose interval covers time_begin
        if (!(time <= c.time_begin && c.time_begin < time + params.dt)) continue;
        for (std::size_t p = 0; p < state.size(); ++p)
            if (c.contains(state.x[p])) state.v[p] += c.vector;
    }
    for (std::size_t p = 0; p < state.size(); ++p)
        clamp_to_margin(state.x[p], grid, params.clamp_margin_cells);
}

void check_stability(const ParticleState& state, int step_index) {
    for (std::size_t p = 0; p < state.size(); ++p) {
        if (!state.x[p].finite() || !state.v[p].finite() || !state.F[p].finite()
            || !state.C[p].finite())
            throw UnstableStep(step_index, "non-finite particle state");
        if (!(state.F[p].determinant() > 0.0))
            throw UnstableStep(step_index, "deformation gradient lost positive determinant");
    }
}

}  // namespace

GridField GridField::make(const Vec3& domain_min, const Vec3& domain_max, int cells_per_axis) {
    if (cells_per_axis < 5)
        throw ValidationError("grid resolution must be at least 5 cells per axis");
    const Vec3 extent = domain_max - domain_min;
    if (!(extent.x > 0) || !(extent.y > 0) || !(extent.z > 0))
        throw ValidationError("domain must have positive extent");
    const double tol = 1e-9 * extent.x;
    if (std::fabs(extent.x - extent.y) > tol || std::fabs(extent.x - extent.z) > tol)
        throw ValidationError("domain must be a cube (per-axis extents equal)");
    GridField g;
    g.origin = domain_min;
    g.cells = cells_per_axis;
    g.dx = extent.x / cells_per_axis;
    g.clear_transfer();
    g.velocity.assign(g.node_count(), Vec3{});
    return g;
}

void GridField::clear_transfer() {
    mass.assign(node_count(), 0.0);
    momentum.assign(node_count(), Vec3{});
    velocity.assign(node_count(), Vec3{});
    active_lo[0] = active_lo[1] = active_lo[2] = 0;
    active_hi[0] = active_hi[1] = active_hi[2] = -1;
}

void GridField::clear_active() {
    for_each_active(*this, [&](int, int, int, std::size_t idx) {
        mass[idx] = 0.0;
        momentum[idx] = Vec3{};
        velocity[idx] = Vec3{};
    });
    active_hi[0] = active_hi[1] = active_hi[2] = -1;
    active_lo[0] = active_lo[1] = active_lo[2] = 0;
}

Stencil bspline_stencil(const Vec3& xp, const GridField& grid) {
    Stencil s;
    const double inv_dx = 1.0 / grid.dx;
    for (int a = 0; a < 3; ++a) {
        const double u = (xp[a] - grid.origin[a]) * inv_dx;
        int base = static_cast<int>(std::floor(u - 0.5));
        // keep the 3-node window on the grid for positions at the margin;
        // clamping t keeps the weights a non-negative partition of unity
        base = std::max(0, std::min(base, grid.cells - 2));
        const double t = std::min(std::max(u - base, 0.5), 1.5);
        s.base[a] = base;
        s.w[a][0] = 0.5 * (1.5 - t) * (1.5 - t);
        s.w[a][1] = 0.75 - (t - 1.0) * (t - 1.0);
        s.w[a][2] = 0.5 * (t - 0.5) * (t - 0.5);
        s.dw[a][0] = -(1.5 - t) * inv_dx;
        s.dw[a][1] = 2.0 * (1.0 - t) * inv_dx;
        s.dw[a][2] = (t - 0.5) * inv_dx;
    }
    return s;
}

ParticleState init_state(const std::vector<Vec3>& positions, const std::vector<double>& masses,
                         const std::vector<double>& volumes, GridField& grid) {
    if (masses.size() != positions.size() || volumes.size() != positions.size())
        throw ValidationError("init_state: positions, masses and volumes must have equal length");
    const Vec3 mn = grid.domain_min(), mx = grid.domain_max();
    for (std::size_t p = 0; p < positions.size(); ++p) {
        const Vec3& x = positions[p];
        if (!x.finite() || x.x < mn.x || x.y < mn.y || x.z < mn.z || x.x > mx.x || x.y > mx.y
            || x.z > mx.z)
            throw OutOfDomain("init_state: particle position outside the simulation domain");
        if (!(masses[p] > 0.0) || !(volumes[p] > 0.0))
            throw ValidationError("init_state: masses and volumes must be positive");
    }
    ParticleState st;
    st.x = positions;
    st.v.assign(positions.size(), Vec3{});
    st.F.assign(positions.size(), Mat3::identity());
    st.C.assign(positions.size(), Mat3::zero());
    st.mass = masses;
    st.volume = volumes;
    grid.clear_transfer();
    return st;
}

void compute_stresses(const ParticleState& state, const MaterialTable& materials,
                      std::vector<Mat3>& out, int threads) {
    out.resize(state.size());
    parallel_for_chunks(state.size(), threads, [&](std::size_t b, std::size_t e, int) {
        for (std::size_t p = b; p < e; ++p)
            out[p] = kirchhoff_stress(materials.entries[materials.particle_material[p]],
                                      state.F[p]);
    });
}

void p2g(const ParticleState& state, GridField& grid, int threads) {
    StepContext ctx;
    int lo[3], hi[3];
    build_stencils(state, grid, ctx.stencils, threads, lo, hi);
    p2g_impl(state, ctx.stencils, lo, hi, grid, ctx, threads);
}

void grid_update(GridField& grid, const ParticleState& state, const std::vector<Mat3>& stresses,
                 const BoundarySet& bc, const StepParams& params, double time, int threads) {
    StepContext ctx;
    int lo[3], hi[3];
    build_stencils(state, grid, ctx.stencils, threads, lo, hi);
    grid_update_impl(grid, state, ctx.stencils, stresses, bc, params, time, ctx, threads);
}

void g2p(const GridField& grid, ParticleState& state, const StepParams& params, int threads) {
    StepContext ctx;
    int lo[3], hi[3];
    build_stencils(state, grid, ctx.stencils, threads, lo, hi);
    g2p_impl(grid, ctx.stencils, state, params, threads);
}

void apply_return_maps(ParticleState& state, const MaterialTable& materials, int threads) {
    parallel_for_chunks(state.size(), threads, [&](std::size_t b, std::size_t e, int) {
        for (std::size_t p = b; p < e; ++p)
            state.F[p] = apply_return_map(materials.entries[materials.particle_material[p]],
                                          state.F[p]);
    });
}

void mpm_step(ParticleState& state, GridField& grid, const MaterialTable& materials,
              const BoundarySet& bc, const StepParams& params, double time, StepContext* ctx,
              StepStats* stats, int step_index) {
    StepContext local;
    StepContext& c = ctx ? *ctx : local;
    const int threads = params.threads;

    try {
        compute_stresses(state, materials, c.stress, threads);
    } catch (const Error& e) {
        throw UnstableStep(step_index, std::string("stress update failed: ") + e.what());
    }
    apply_particle_boundaries(state, bc, grid, params, time);
    int lo[3], hi[3];
    build_stencils(state, grid, c.stencils, threads, lo, hi);
    p2g_impl(state, c.stencils, lo, hi, grid, c, threads);
    if (stats) {
        stats->grid_mass = 0.0;
        stats->grid_momentum = Vec3{};
        for_each_active(grid, [&](int, int, int, std::size_t idx) {
            stats->grid_mass += grid.mass[idx];
            stats->grid_momentum += grid.momentum[idx];
        });
    }
    grid_update_impl(grid, state, c.stencils, c.stress, bc, params, time, c, threads);
    g2p_impl(grid, c.stencils, state, params, threads);
    try {
        apply_return_maps(state, materials, threads);
    } catch (const Error& e) {
        throw UnstableStep(step_index, std::string("return map failed: ") + e.what());
    }
    check_stability(state, step_index);
    if (stats) {
        stats->particle_momentum = Vec3{};
        for (std::size_t p = 0; p < state.size(); ++p)
            stats->particle_momentum += state.v[p] * state.mass[p];
    }
}

namespace {

void record_frame(Trajectory& out, const ParticleState& state, double time,
                  bool record_deformation) {
    TrajectoryFrame f;
    f.time = time;
    f.positions = state.x;
    if (record_deformation) f.deformation = state.F;
    out.frames.push_back(std::move(f));
}

}  // namespace

Trajectory simulate_from(const SimInput& input, const ParticleState& start, int n_steps,
                         int sample_every, ParticleState* end_state,
                         const SimulateOptions& opts) {
    if (n_steps < 0) throw ValidationError("simulate: n_steps must be non-negative");
    if (sample_every < 1) throw ValidationError("simulate: sample_every must be >= 1");
    if (input.materials.particle_material.size() != start.size())
        throw ValidationError("simulate: material assignment does not cover all particles");

    ParticleState state = start;
    GridField grid = input.grid;
    StepContext ctx;
    Trajectory out;
    out.particle_count = state.size();
    record_frame(out, state, 0.0, opts.record_deformation);

    for (int step = 0; step < n_steps; ++step) {
        StepStats st;
        mpm_step(state, grid, input.materials, input.boundaries, input.params,
                 step * input.params.dt, &ctx, opts.stats ? &st : nullptr, step);
        if (opts.stats) opts.stats->push_back(st);
        if ((step + 1) % sample_every == 0 || step + 1 == n_steps)
            record_frame(out, state, (step + 1) * input.params.dt, opts.record_deformation);
    }
    if (end_state) *end_state = std::move(state);
    return out;
}

Trajectory simulate(const SimInput& input, int n_steps, int sample_every,
                    const SimulateOptions& opts) {
    return simulate_from(input, input.initial, n_steps, sample_every, nullptr, opts);
}

}  // namespace mpmgs
