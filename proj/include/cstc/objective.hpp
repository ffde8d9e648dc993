#pragma once

#include <string>

#include "cstc/model.hpp"
#include "cstc/traversal.hpp"

namespace cstc {

/// Weights with magnitude at or below this are treated as zero when
/// counting exact costs and when clamping supports.
inline constexpr double kZeroThreshold = 1e-8;

inline bool is_active(double w) noexcept { return std::abs(w) > kZeroThreshold; }

struct CostSchedule {
    Vector feature_costs;  // c_alpha, length d
    Vector learner_costs;  // e_t, length T
    std::string units = "weak-learner evaluations";

    /// Throws InvalidInput unless lengths match and costs are finite, c > 0, e >= 0.
    void validate(int num_features, int num_learners) const;
};

struct LossConfig {
    double lambda = 1.0;
    double rho = 0.0;
    double epsilon_aux = 1e-8;

    void validate() const;
};

/// Read-only view over everything the loss depends on besides the tree.
struct LossContext {
    const Matrix& phi;        // n x T
    const Vector& labels;     // n
    const Matrix& usage;      // d x T, binary
    const CostSchedule& schedule;
    LossConfig cfg;
};

/// Variational variables of the Lemma-1 substitution sqrt(g) = min_z (g/z + z)/2,
/// one per square-root or absolute-value term of the global loss.
struct AuxiliaryVars {
    Matrix eval;     // |L| x T, evaluation-cost term of learner t on terminal l's path
    Matrix feature;  // |L| x d, extraction-cost term of feature a on terminal l's path
    Matrix l1;       // |V| x T, absolute value of beta_t^k
};

/// The squared quantities under each substituted term, at current parameters.
/// Same layout as AuxiliaryVars.
AuxiliaryVars squared_group_norms(const CstcTree& tree, const Matrix& usage);

double exact_node_cost(const Vector& beta, const CostSchedule& schedule, const Matrix& usage);
/// Cost of terminal l's path with each learner and feature charged once.
/// The terminal's parent contributes its prediction weights, plus its routing
/// weights when it still routes into a classifier child.
double exact_path_cost(const CstcTree& tree, int terminal, const CostSchedule& schedule, const Matrix& usage);
/// Weights of each node along terminal l's path that are evaluated at test time.
std::vector<const Vector*> path_weights(const CstcTree& tree, int terminal);

double expected_risk(const CstcTree& tree, const Matrix& phi, const Vector& labels, const TraversalState& state);
double relaxed_cost_penalty(const CstcTree& tree, const TraversalState& state, const CostSchedule& schedule,
                            const Matrix& usage);
double l1_penalty(const CstcTree& tree);
/// Risk + rho * sum_k |beta^k|_1 + lambda * relaxed cost penalty.
double global_loss(const CstcTree& tree, const LossContext& ctx);
double global_loss(const CstcTree& tree, const LossContext& ctx, const TraversalState& state);

/// Global loss with every root and absolute value replaced by its Lemma-1 form.
double substituted_loss(const CstcTree& tree, const LossContext& ctx, const AuxiliaryVars& aux);

struct NodeGradient {
    Vector beta;
    double theta = 0.0;
};

/// Gradient of the substituted loss with respect to (beta^k, theta^k), including
/// the dependence of descendant traversal probabilities and terminal marginals.
NodeGradient loss_gradient(const CstcTree& tree, int k, const LossContext& ctx, const AuxiliaryVars& aux);

/// The substituted loss as a function of one node's parameters, all else fixed.
/// Caches the other nodes' scores so each evaluation costs O(n T + n |V|).
class NodeObjective {
public:
    NodeObjective(CstcTree tree, int k, const LossContext& ctx, const AuxiliaryVars& aux);

    /// Loss at (beta, theta); fills the gradient when both pointers are set.
    double evaluate(const Vector& beta, double theta, Vector* grad_beta = nullptr, double* grad_theta = nullptr);
    /// Positive diagonal curvature estimate for preconditioning, at the last evaluated point.
    Vector diagonal_curvature() const;

    const CstcTree& tree() const noexcept { return tree_; }

private:
    CstcTree tree_;
    int k_;
    const LossContext& ctx_;
    const AuxiliaryVars& aux_;
    Matrix scores_;
    std::vector<std::vector<int>> paths_;
    std::vector<int> subtree_terminals_;
    // state at the last evaluation
    TraversalState state_;
    Vector descendant_upper_;  // dL/da_i through node k's sigmoid
};

}  // namespace cstc
