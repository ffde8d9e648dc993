#include "cstc/objective.hpp"

#include <cmath>

#include "cstc/error.hpp"

namespace cstc {

void CostSchedule::validate(int num_features, int num_learners) const {
    if (feature_costs.size() != num_features)
        throw InvalidInput("cost schedule has " + std::to_string(feature_costs.size()) + " feature costs, expected " +
                           std::to_string(num_features));
    if (learner_costs.size() != num_learners)
        throw InvalidInput("cost schedule has " + std::to_string(learner_costs.size()) + " learner costs, expected " +
                           std::to_string(num_learners));
    if (!feature_costs.allFinite() || (feature_costs.array() <= 0.0).any())
        throw InvalidInput("feature costs must be finite and strictly positive");
    if (!learner_costs.allFinite() || (learner_costs.array() < 0.0).any())
        throw InvalidInput("learner costs must be finite and non-negative");
}

void LossConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be finite and >= 0");
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw InvalidInput("rho must be finite and >= 0");
    if (!(epsilon_aux > 0.0)) throw InvalidInput("epsilon_aux must be > 0");
}

namespace {

Matrix squared_weights(const CstcTree& tree) {
    Matrix sq(tree.num_learners(), tree.num_nodes());
    for (int k = 0; k < tree.num_nodes(); ++k) sq.col(k) = tree.node(k).beta.array().square();
    return sq;
}

}  // namespace

AuxiliaryVars squared_group_norms(const CstcTree& tree, const Matrix& usage) {
    const Matrix sq = squared_weights(tree);
    const Matrix fsq = usage * sq;
    AuxiliaryVars g;
    g.eval = Matrix::Zero(tree.num_terminals(), tree.num_learners());
    g.feature = Matrix::Zero(tree.num_terminals(), usage.rows());
    for (int l = 0; l < tree.num_terminals(); ++l) {
        for (int j : tree.path(l)) {
            g.eval.row(l) += sq.col(j).transpose();
            g.feature.row(l) += fsq.col(j).transpose();
        }
    }
    g.l1 = sq.transpose();
    return g;
}

double exact_node_cost(const Vector& beta, const CostSchedule& schedule, const Matrix& usage) {
    double cost = 0.0;
    std::vector<char> extracted(usage.rows(), 0);
    for (Eigen::Index t = 0; t < beta.size(); ++t) {
        if (!is_active(beta[t])) continue;
        cost += schedule.learner_costs[t];
        for (Eigen::Index a = 0; a < usage.rows(); ++a)
            if (usage(a, t) != 0.0) extracted[a] = 1;
    }
    for (Eigen::Index a = 0; a < usage.rows(); ++a)
        if (extracted[a]) cost += schedule.feature_costs[a];
    return cost;
}

std::vector<const Vector*> path_weights(const CstcTree& tree, int terminal) {
    const std::vector<int> path = tree.path(terminal);
    std::vector<const Vector*> out;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) out.push_back(&tree.node(path[i]).beta);
    const ClassifierNode& last = tree.node(path.back());
    out.push_back(&last.prediction_weights());
    if (last.tuned_beta && !(last.upper.is_terminal() && last.lower.is_terminal())) out.push_back(&last.beta);
    return out;
}

double exact_path_cost(const CstcTree& tree, int terminal, const CostSchedule& schedule, const Matrix& usage) {
    const auto weights = path_weights(tree, terminal);
    double cost = 0.0;
    for (int t = 0; t < tree.num_learners(); ++t) {
        double mass = 0.0;
        for (const Vector* w : weights) mass += is_active((*w)[t]) ? std::abs((*w)[t]) : 0.0;
        if (mass != 0.0) cost += schedule.learner_costs[t];
    }
    for (Eigen::Index a = 0; a < usage.rows(); ++a) {
        double mass = 0.0;
        for (const Vector* w : weights)
            for (int t = 0; t < tree.num_learners(); ++t)
                if (is_active((*w)[t])) mass += std::abs(usage(a, t) * (*w)[t]);
        if (mass != 0.0) cost += schedule.feature_costs[a];
    }
    return cost;
}

double expected_risk(const CstcTree& tree, const Matrix& phi, const Vector& labels, const TraversalState& state) {
    const Matrix scores = node_scores(tree, phi);
    const auto n = static_cast<double>(phi.rows());
    const Matrix residual = scores.colwise() - labels;
    return (state.node_p.array() * residual.array().square()).sum() / n;
}

double relaxed_cost_penalty(const CstcTree& tree, const TraversalState& state, const CostSchedule& schedule,
                            const Matrix& usage) {
    const AuxiliaryVars g = squared_group_norms(tree, usage);
    double total = 0.0;
    for (int l = 0; l < tree.num_terminals(); ++l) {
        const double eval = schedule.learner_costs.dot(g.eval.row(l).array().sqrt().matrix().transpose());
        const double feat = schedule.feature_costs.dot(g.feature.row(l).array().sqrt().matrix().transpose());
        total += state.marginals[l] * (eval + feat);
    }
    return total;
}

double l1_penalty(const CstcTree& tree) {
    double total = 0.0;
    for (const auto& node : tree.nodes()) total += node.beta.lpNorm<1>();
    return total;
}

double global_loss(const CstcTree& tree, const LossContext& ctx, const TraversalState& state) {
    return expected_risk(tree, ctx.phi, ctx.labels, state) + ctx.cfg.rho * l1_penalty(tree) +
           ctx.cfg.lambda * relaxed_cost_penalty(tree, state, ctx.schedule, ctx.usage);
}

double global_loss(const CstcTree& tree, const LossContext& ctx) {
    return global_loss(tree, ctx, soft_probabilities(tree, ctx.phi));
}

NodeObjective::NodeObjective(CstcTree tree, int k, const LossContext& ctx, const AuxiliaryVars& aux)
    : tree_(std::move(tree)), k_(k), ctx_(ctx), aux_(aux) {
    if (k < 0 || k >= tree_.num_nodes()) throw InvalidInput("NodeObjective: unknown node");
    if (ctx.phi.cols() != tree_.num_learners()) throw InvalidInput("NodeObjective: phi width does not match tree");
    if (ctx.labels.size() != ctx.phi.rows()) throw InvalidInput("NodeObjective: label count does not match phi");
    if (ctx.usage.cols() != tree_.num_learners()) throw InvalidInput("NodeObjective: usage matrix width mismatch");
    if (aux.eval.rows() != tree_.num_terminals() || aux.eval.cols() != tree_.num_learners() ||
        aux.feature.rows() != tree_.num_terminals() || aux.feature.cols() != ctx.usage.rows() ||
        aux.l1.rows() != tree_.num_nodes() || aux.l1.cols() != tree_.num_learners())
        throw InvalidInput("NodeObjective: auxiliary variables do not match the tree");
    scores_ = node_scores(tree_, ctx.phi);
    paths_.reserve(tree_.num_terminals());
    for (int l = 0; l < tree_.num_terminals(); ++l) paths_.push_back(tree_.path(l));
    subtree_terminals_ = tree_.subtree_terminals(k);
}

double NodeObjective::evaluate(const Vector& beta, double theta, Vector* grad_beta, double* grad_theta) {
    const Matrix& phi = ctx_.phi;
    const Vector& y = ctx_.labels;
    const CostSchedule& sched = ctx_.schedule;
    const LossConfig& cfg = ctx_.cfg;
    const auto n = static_cast<double>(phi.rows());
    const int num_nodes = tree_.num_nodes();
    const int num_terms = tree_.num_terminals();

    tree_.node(k_).beta = beta;
    tree_.node(k_).theta = theta;
    scores_.col(k_).noalias() = phi * beta;
    state_ = soft_probabilities_from_scores(tree_, scores_);

    const Matrix loss = (scores_.colwise() - y).array().square().matrix();
    const double risk = (state_.node_p.array() * loss.array()).sum() / n;

    const Matrix sq = squared_weights(tree_);
    const Matrix fsq = ctx_.usage * sq;

    // substituted term value (g / z + z) / 2, summed with cost weights
    Vector path_cost(num_terms);
    for (int l = 0; l < num_terms; ++l) {
        Vector g_eval = Vector::Zero(tree_.num_learners());
        Vector g_feat = Vector::Zero(ctx_.usage.rows());
        for (int j : paths_[l]) {
            g_eval += sq.col(j);
            g_feat += fsq.col(j);
        }
        const auto ze = aux_.eval.row(l).transpose().array();
        const auto zf = aux_.feature.row(l).transpose().array();
        path_cost[l] = 0.5 * (sched.learner_costs.array() * (g_eval.array() / ze + ze)).sum() +
                       0.5 * (sched.feature_costs.array() * (g_feat.array() / zf + zf)).sum();
    }
    const double cost = state_.marginals.dot(path_cost);
    const double l1 = 0.5 * cfg.rho * (sq.transpose().array() / aux_.l1.array() + aux_.l1.array()).sum();
    const double value = risk + l1 + cfg.lambda * cost;

    // subtree accumulation of p * loss and lambda * p^l * G_l per instance,
    // needed for the derivative through the sigmoid of node k
    Matrix acc(phi.rows(), num_nodes);
    auto child_mass = [&](const ChildRef& c) -> Vector {
        if (c.is_terminal()) return cfg.lambda * path_cost[c.index] * state_.terminal_p.col(c.index);
        return acc.col(c.index);
    };
    for (int j = num_nodes - 1; j >= k_; --j) {
        const ClassifierNode& node = tree_.node(j);
        acc.col(j) = state_.node_p.col(j).cwiseProduct(loss.col(j)) + child_mass(node.upper) + child_mass(node.lower);
    }
    const ClassifierNode& self = tree_.node(k_);
    const auto s = state_.upper_p.col(k_).array();
    const Vector up = child_mass(self.upper);
    const Vector low = child_mass(self.lower);
    descendant_upper_ = ((1.0 - s) * up.array() - s * low.array()).matrix() / n;

    if (grad_beta && grad_theta) {
        const Vector residual = scores_.col(k_) - y;
        const Vector r = (2.0 / n) * state_.node_p.col(k_).cwiseProduct(residual) + descendant_upper_;
        Vector g = phi.transpose() * r;
        g.array() += cfg.rho * beta.array() / aux_.l1.row(k_).transpose().array();
        for (int l : subtree_terminals_) {
            const double w = cfg.lambda * state_.marginals[l];
            if (w == 0.0) continue;
            const Vector feat_scale = ctx_.usage.transpose() *
                                      (sched.feature_costs.array() / aux_.feature.row(l).transpose().array()).matrix();
            g.array() += w * beta.array() *
                         (sched.learner_costs.array() / aux_.eval.row(l).transpose().array() + feat_scale.array());
        }
        *grad_beta = std::move(g);
        *grad_theta = -descendant_upper_.sum();
    }
    return value;
}

Vector NodeObjective::diagonal_curvature() const {
    const Matrix& phi = ctx_.phi;
    const auto n = static_cast<double>(phi.rows());
    const LossConfig& cfg = ctx_.cfg;
    const Vector weight = (2.0 / n) * state_.node_p.col(k_) + descendant_upper_.cwiseAbs();
    Vector diag(tree_.num_learners() + 1);
    diag.head(tree_.num_learners()) = phi.array().square().matrix().transpose() * weight;
    diag.head(tree_.num_learners()).array() += cfg.rho / aux_.l1.row(k_).transpose().array();
    for (int l : subtree_terminals_) {
        const double w = cfg.lambda * state_.marginals[l];
        const Vector feat_scale =
            ctx_.usage.transpose() *
            (ctx_.schedule.feature_costs.array() / aux_.feature.row(l).transpose().array()).matrix();
        diag.head(tree_.num_learners()).array() +=
            w * (ctx_.schedule.learner_costs.array() / aux_.eval.row(l).transpose().array() + feat_scale.array());
    }
    diag[tree_.num_learners()] = descendant_upper_.cwiseAbs().sum();
    const double floor = 1e-12 * std::max(1.0, diag.maxCoeff());
    return diag.cwiseMax(floor);
}

double substituted_loss(const CstcTree& tree, const LossContext& ctx, const AuxiliaryVars& aux) {
    NodeObjective obj(tree, 0, ctx, aux);
    return obj.evaluate(tree.node(0).beta, tree.node(0).theta);
}

NodeGradient loss_gradient(const CstcTree& tree, int k, const LossContext& ctx, const AuxiliaryVars& aux) {
    NodeObjective obj(tree, k, ctx, aux);
    NodeGradient g;
    obj.evaluate(tree.node(k).beta, tree.node(k).theta, &g.beta, &g.theta);
    return g;
}

}  // namespace cstc
