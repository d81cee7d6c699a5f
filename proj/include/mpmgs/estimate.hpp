#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "mpmgs/materials.hpp"
#include "mpmgs/mpm.hpp"
#include "mpmgs/partition.hpp"

namespace mpmgs {

/// Learnable per-neighborhood parameters: categorical logits for the elastic
/// and plastic heads plus unconstrained continuous parameters (log Young's
/// modulus and a logit-transformed Poisson ratio).
struct LogitEntry {
    std::array<double, kElasticModelCount> elastic_logits{};
    std::array<double, kPlasticModelCount> plastic_logits{};
    double log_e = 0.0;
    double nu_logit = 0.0;
};

struct MaterialLogits {
    std::vector<LogitEntry> rows;      // one per neighborhood
    double temperature = 1.0;          // straight-through softmax temperature
    double friction_angle_deg = 45.0;  // fixed plasticity constants
    double yield_stress = 3e4;

    /// Fresh logits: the first category of each head starts with a small
    /// positive bias so the initial selection is held deterministically
    /// against optimizer noise until a real gradient overcomes it.
    static MaterialLogits init(std::size_t neighborhoods, double youngs_modulus,
                               double poisson_ratio, double tie_bias = 5e-3);
};

/// E = exp(log_e) clamped to [1, 1e12] Pa; any finite input maps to a valid
/// modulus.
double map_young(double log_e);
double unmap_young(double youngs_modulus);

/// nu = 0.5 * sigmoid(nu_logit), kept strictly inside (0, 0.5).
double map_poisson(double nu_logit);
double unmap_poisson(double poisson_ratio);

/// Hard (argmax) material selection for one neighborhood; ties resolve to
/// the lowest index. Gradients flow through the selection as if it were a
/// softmax at the configured temperature (straight-through estimator); see
/// estimate_gradients.
MaterialSpec select_material(const MaterialLogits& logits, int neighborhood);

/// One-hot material table over the partition's neighborhoods.
MaterialTable hard_material_table(const MaterialLogits& logits, const Partition& partition);

/// Mean squared positional error over all sampled frames and particles
/// (m^2); zero iff the trajectories coincide. Throws ShapeMismatch on
/// differing frame or particle counts.
double trajectory_loss(const Trajectory& simulated, const Trajectory& reference);

/// Per-neighborhood gradient, coordinates ordered as
/// [elastic_logits x3, plastic_logits x4, log_e, nu_logit].
struct NeighborhoodGradient {
    std::array<double, 9> g{};
};

struct GradientResult {
    std::vector<NeighborhoodGradient> rows;
    double loss = 0.0;            // loss at the unperturbed parameters
    ParticleState end_state;      // state after the stage window (unperturbed)
};

struct StageWindow {
    int stage = 0;     // 0-based stage index
    int frames = 15;   // M frames simulated in the window
    int stride = 10;   // m steps between sampled frames
};

/// Loss gradient w.r.t. every MaterialLogits field over one stage window,
/// starting from `start`. Continuous coordinates use central finite
/// differences of half-width fd_step in unconstrained space. Categorical
/// coordinates realize the straight-through contract: the loss sensitivity
/// to each model's blend weight (central differences around the one-hot
/// selection) is chained through the softmax Jacobian at the configured
/// temperature. Deterministic for any thread count.
GradientResult estimate_gradients(const SimInput& input, const ParticleState& start,
                                  const Partition& partition, const MaterialLogits& logits,
                                  const Trajectory& reference, const StageWindow& window,
                                  double fd_step = 1e-4, int threads = 1);

struct LossRecord {
    int outer = 0;
    int stage = 0;
    int internal = 0;
    double loss = 0.0;
};

struct TrainConfig {
    int stages = 10;            // G
    int frames_per_stage = 15;  // M
    int internal_iters = 30;
    int outer_iters = 5;
    int sample_stride = 10;     // m
    double learning_rate = 5e-5;
    double temperature = 1.0;
    double fd_step = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    // kept above the finite-difference noise floor of float32 references so
    // quantization noise cannot accumulate into parameter drift
    double adam_eps = 1e-6;
    int threads = 1;
    /// Called at the start of every internal iteration with the restored
    /// checkpoint state (outer, stage, internal, state).
    std::function<void(int, int, int, const ParticleState&)> on_internal_start;
};

struct TrainResult {
    MaterialLogits logits;
    std::vector<LossRecord> log;      // outer_iters * stages * internal_iters records
    double initial_full_loss = 0.0;   // full-horizon loss with the initial parameters
    double final_full_loss = 0.0;     // same with the trained parameters
};

/// Staged multi-batch training: per outer iteration the state restarts from
/// the initial state; per stage the pre-stage checkpoint is restored at the
/// start of every internal iteration, the stage window is simulated, one
/// optimizer step (Adam) is applied, and the stage advances with the state
/// of the last internal iteration.
TrainResult train(const SimInput& input, const Partition& partition, MaterialLogits logits,
                  const Trajectory& reference, const TrainConfig& cfg);

/// Full-horizon loss (stages * frames_per_stage frames at the configured
/// stride) of the hard materials induced by `logits`.
double full_horizon_loss(const SimInput& input, const Partition& partition,
                         const MaterialLogits& logits, const Trajectory& reference,
                         const TrainConfig& cfg);

/// Structured-text material assignment: one line per neighborhood with
/// elastic id, plastic id, E, nu and the plasticity constants.
void write_material_assignment(const std::string& path, const MaterialLogits& logits,
                               const Partition& partition);

/// Delimited loss log: "outer,stage,internal,loss" per record.
void write_loss_log(const std::string& path, const std::vector<LossRecord>& log);

}  // namespace mpmgs
