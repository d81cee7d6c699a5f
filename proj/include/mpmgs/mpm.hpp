#pragma once

#include <cstddef>
#include <vector>

#include "mpmgs/boundary.hpp"
#include "mpmgs/mat3.hpp"
#include "mpmgs/materials.hpp"
#include "mpmgs/vec3.hpp"

namespace mpmgs {

/// Per-particle simulation state, struct-of-arrays over the particle index.
/// Mass and volume are constant over time.
struct ParticleState {
    std::vector<Vec3> x;          // position (m)
    std::vector<Vec3> v;          // velocity (m/s)
    std::vector<Mat3> F;          // deformation gradient
    std::vector<Mat3> C;          // affine momentum (1/s)
    std::vector<double> mass;     // kg
    std::vector<double> volume;   // m^3

    std::size_t size() const { return x.size(); }
};

/// Background grid of a cubic domain: `cells` cells per axis, cells+1 nodes
/// per axis, spacing dx = extent / cells. Node positions are fixed.
struct GridField {
    Vec3 origin;
    double dx = 0.0;
    int cells = 0;  // per axis

    std::vector<double> mass;      // kg, filled by p2g
    std::vector<Vec3> momentum;    // kg m/s, filled by p2g
    std::vector<Vec3> velocity;    // m/s, filled by grid_update

    // node-index bounding box of the nodes last touched by p2g; grid passes
    // iterate over it instead of the whole grid
    int active_lo[3] = {0, 0, 0};
    int active_hi[3] = {-1, -1, -1};  // empty

    static GridField make(const Vec3& domain_min, const Vec3& domain_max, int cells_per_axis);

    int nodes_per_axis() const { return cells + 1; }
    std::size_t node_count() const {
        const std::size_t n = static_cast<std::size_t>(nodes_per_axis());
        return n * n * n;
    }
    std::size_t node_index(int i, int j, int k) const {
        const std::size_t n = static_cast<std::size_t>(nodes_per_axis());
        return (static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)) * n
             + static_cast<std::size_t>(k);
    }
    Vec3 node_position(int i, int j, int k) const {
        return origin + Vec3(i, j, k) * dx;
    }
    Vec3 domain_min() const { return origin; }
    Vec3 domain_max() const { return origin + Vec3::all(dx * cells); }

    void clear_transfer();   // zero all arrays and reset the active box
    void clear_active();     // zero only the active box, then mark it empty
    bool has_active() const { return active_hi[0] >= active_lo[0]; }
};

struct StepParams {
    double dt = 3e-4;             // s
    Vec3 gravity{0, 0, -9.8};     // m/s^2
    int threads = 1;
    double node_mass_epsilon = 1e-12;  // kg; below this a node is treated as empty
    int clamp_margin_cells = 2;        // particles are kept this many cells inside the domain
};

/// Material assignment: per-particle index into a table of blended
/// materials (one-hot entries for ordinary simulation).
struct MaterialTable {
    std::vector<BlendedMaterial> entries;
    std::vector<int> particle_material;

    static MaterialTable uniform(const MaterialSpec& spec, std::size_t particle_count) {
        MaterialTable t;
        t.entries.push_back(BlendedMaterial::from(spec));
        t.particle_material.assign(particle_count, 0);
        return t;
    }
};

/// Quadratic B-spline stencil of one particle: 3 nodes per axis starting at
/// `base`, with per-axis weights and weight derivatives (d/dx, units 1/m).
struct Stencil {
    int base[3];
    double w[3][3];   // [axis][offset]
    double dw[3][3];  // [axis][offset]
};

/// Weights sum to 1 per axis; derivative weights sum to 0.
Stencil bspline_stencil(const Vec3& xp, const GridField& grid);

/// Conserved totals recorded during a step.
struct StepStats {
    double grid_mass = 0.0;
    Vec3 grid_momentum;       // after p2g
    Vec3 particle_momentum;   // after the full step
};

/// Scratch buffers reused across steps (per-thread grid accumulators and the
/// per-particle stencil/stress caches).
struct StepContext {
    std::vector<Mat3> stress;
    std::vector<Stencil> stencils;
    std::vector<Vec3> force;
    std::vector<std::vector<double>> mass_buf;
    std::vector<std::vector<Vec3>> vec_buf;
};

/// v = 0, F = I, C = 0 for every particle; grid cleared. Throws OutOfDomain
/// if a position lies outside the grid domain, and ValidationError on
/// non-positive masses/volumes or mismatched array lengths.
ParticleState init_state(const std::vector<Vec3>& positions, const std::vector<double>& masses,
                         const std::vector<double>& volumes, GridField& grid);

/// Kirchhoff stress per particle (the F2Stress pass).
void compute_stresses(const ParticleState& state, const MaterialTable& materials,
                      std::vector<Mat3>& out, int threads = 1);

/// APIC transfer of mass and momentum to the grid:
///   m_i = sum_p w_ip m_p
///   (m v)_i = sum_p w_ip m_p (v_p + C_p (x_i - x_p))
void p2g(const ParticleState& state, GridField& grid, int threads = 1);

/// Momentum -> velocity, internal stress forces, gravity and force-type
/// boundary conditions, then velocity-constraint boundary conditions.
/// Nodes lighter than node_mass_epsilon end with v = 0.
void grid_update(GridField& grid, const ParticleState& state, const std::vector<Mat3>& stresses,
                 const BoundarySet& bc, const StepParams& params, double time, int threads = 1);

/// Velocity/position/affine update and the trial deformation gradient
/// (written into state.F):
///   v_p = sum w v_i,  x_p += dt v_p,  C_p = 4/dx^2 sum w v_i (x_i - x_p)^T,
///   F_trial = (I + dt sum v_i dw^T) F.
/// Positions are clamped clamp_margin_cells inside the domain.
void g2p(const GridField& grid, ParticleState& state, const StepParams& params, int threads = 1);

/// Plasticity correction F = psi(F_trial) for every particle.
void apply_return_maps(ParticleState& state, const MaterialTable& materials, int threads = 1);

/// One full MLS-MPM step: stress update, particle boundary conditions,
/// P2G, grid update (with grid boundary conditions), G2P, return map,
/// stability check. Throws UnstableStep (with `step_index`) when any state
/// becomes non-finite or a deformation gradient loses positive determinant.
void mpm_step(ParticleState& state, GridField& grid, const MaterialTable& materials,
              const BoundarySet& bc, const StepParams& params, double time,
              StepContext* ctx = nullptr, StepStats* stats = nullptr, int step_index = 0);

/// One sampled frame: particle positions and deformation gradients.
struct TrajectoryFrame {
    double time = 0.0;
    std::vector<Vec3> positions;
    std::vector<Mat3> deformation;
};

struct Trajectory {
    std::size_t particle_count = 0;
    std::vector<TrajectoryFrame> frames;
};

/// A fully assembled simulation: initial state, grid, materials, boundary
/// conditions and step parameters.
struct SimInput {
    ParticleState initial;
    GridField grid;
    MaterialTable materials;
    BoundarySet boundaries;
    StepParams params;
};

struct SimulateOptions {
    std::vector<StepStats>* stats = nullptr;  // one record per step when set
    bool record_deformation = true;  // skip storing F when frames only feed a positional loss
};

/// Runs n_steps steps, sampling the initial state, every sample_every-th
/// step, and the final step. Deterministic for a fixed thread count;
/// bitwise-deterministic single-threaded. UnstableStep propagates with the
/// offending step index.
Trajectory simulate(const SimInput& input, int n_steps, int sample_every,
                    const SimulateOptions& opts = {});

/// Variant starting from an explicit state (shares everything else with
/// `input`); used by the staged training loop.
Trajectory simulate_from(const SimInput& input, const ParticleState& start, int n_steps,
                         int sample_every, ParticleState* end_state = nullptr,
                         const SimulateOptions& opts = {});

}  // namespace mpmgs
