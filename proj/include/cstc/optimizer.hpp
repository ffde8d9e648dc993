#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cstc/objective.hpp"

namespace cstc {

struct OptimizerConfig {
    int sweeps = 20;        // global block-coordinate cycles after initialization
    int cg_iters = 50;      // conjugate-gradient steps per alternation
    int alternations = 10;  // CG / auxiliary alternations per node visit
    double tol = 1e-6;      // relative loss decrease that counts as converged
    /// Starting value of the auxiliary variables of a freshly initialized node.
    /// Any positive start is valid; at the floor a zero weight could never move.
    double initial_aux = 1.0;

    void validate() const;
};

/// z = max(sqrt(g), epsilon) elementwise, the minimizer of (g/z + z)/2 over z >= epsilon.
Vector aux_closed_form(const Vector& g, double epsilon_aux);
AuxiliaryVars aux_closed_form(const AuxiliaryVars& g, double epsilon_aux);
/// Auxiliary variables at their closed-form optimum for the tree's parameters.
AuxiliaryVars synced_aux(const CstcTree& tree, const Matrix& usage, double epsilon_aux);

using ValueGradient = std::function<double(const Vector& x, Vector& grad)>;
/// Called after each accepted step; returning false stops the iteration.
using StepCallback = std::function<bool(const Vector& x, double value)>;

struct CgOutcome {
    double loss = 0.0;
    double grad_norm = 0.0;
    int steps = 0;
    bool finite = true;
};

/// Diagonally preconditioned Polak-Ribiere+ nonlinear CG with restarts on
/// non-descent and backtracking Armijo line search (c = 1e-4, halving).
/// Only Armijo-satisfying steps are taken, so the value never increases.
/// Stops after `max_iters` steps or when a step's relative decrease is at
/// most `rel_tol`.
CgOutcome minimize_cg(const ValueGradient& f, Vector& x, const Vector& precond, int max_iters, double rel_tol,
                      const StepCallback& on_step = {});

struct NodeUpdate {
    int node = -1;
    double loss_before = 0.0;
    double loss_after = 0.0;
    double grad_norm = 0.0;
    double seconds = 0.0;
    /// Substituted loss after every CG block and every auxiliary refresh.
    std::vector<double> trace;
};

/// Alternates preconditioned Polak-Ribiere CG on (beta^k, theta^k) with
/// closed-form auxiliary refreshes. Updates node k of `tree` and `aux` in place.
NodeUpdate optimize_node(CstcTree& tree, int k, const LossContext& ctx, AuxiliaryVars& aux,
                         const OptimizerConfig& opt);

struct TrainLogEntry {
    std::string phase;  // "init" or "sweep"
    int sweep = 0;
    NodeUpdate update;
};

struct TrainResult {
    CstcTree tree;
    std::vector<TrainLogEntry> log;
    /// Substituted loss of the full tree across the cyclic sweeps, one entry per recorded step.
    std::vector<double> sweep_trace;
    int sweeps_run = 0;
    bool converged = false;
};

/// Top-down initialization: node k is optimized with its descendants cut off,
/// making each subproblem the convex leaf problem.
std::vector<TrainLogEntry> initialize_tree(CstcTree& tree, const LossContext& ctx, const OptimizerConfig& opt);

/// Initialization followed by breadth-first cyclic sweeps until the relative
/// improvement of a sweep drops below tol. Weights at or below the zero
/// threshold are clamped to exactly zero at the end.
TrainResult train(CstcTree shape, const LossContext& ctx, const OptimizerConfig& opt);

/// One JSON object per line: phase, sweep, node, losses, gradient norm, wall time.
std::string format_train_log(const std::vector<TrainLogEntry>& log);

}  // namespace cstc
