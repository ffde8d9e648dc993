#pragma once

#include <vector>

#include "cstc/evaluation.hpp"
#include "cstc/optimizer.hpp"

namespace cstc {

struct ValidationMetric {
    enum class Kind { mse, ndcg_at_k };
    Kind kind = Kind::mse;
    int k = 5;

    void validate() const;
    /// Hard-routed tree performance on `set`.
    double evaluate(const CstcTree& tree, const EvalSet& set) const;
    /// True when `candidate` is no worse than `reference` by more than `tolerance`.
    bool no_worse(double candidate, double reference, double tolerance = 0.0) const;
    /// True when `candidate` is strictly better than `reference`.
    bool better(double candidate, double reference) const;
};

struct PruneResult {
    CstcTree tree;
    /// Node indices (in the input tree's numbering) whose subtrees were removed, in order.
    std::vector<int> removed;
    /// Validation metric before pruning and after each accepted removal.
    std::vector<double> trajectory;
};

/// Greedy bottom-up pruning: a non-root classifier whose children are both
/// terminals is replaced by a terminal of its parent when the validation
/// metric does not get worse by more than `tolerance`. Candidates are tried
/// deepest first, lower child before upper; repeats until nothing is accepted.
PruneResult prune(const CstcTree& tree, const EvalSet& validation, const ValidationMetric& metric,
                  double tolerance = 0.0);

struct FineTuneConfig {
    double rho = 0.0;
    double epsilon_aux = 1e-8;
    OptimizerConfig opt;
};

struct FineTuneNodeReport {
    int node = -1;
    int support = 0;
    int steps = 0;
    bool stopped_early = false;
};

struct FineTuneResult {
    CstcTree tree;
    std::vector<FineTuneNodeReport> nodes;
    std::vector<double> validation_trajectory;
};

/// Re-fits each predictive node's prediction weights on its support,
/// minimizing (1/n) sum_i p_i^k (phi_i^T w - y_i)^2 + rho |w|_1 with p_i^k
/// from the current routing held fixed. Routing weights are untouched.
/// With a validation set, each node stops as soon as the hard-routed
/// validation metric gets worse and keeps its best weights.
FineTuneResult fine_tune(const CstcTree& tree, const Matrix& phi, const Vector& labels, const EvalSet* validation,
                         const ValidationMetric& metric, const FineTuneConfig& cfg);

}  // namespace cstc
