#include "cstc/postprocess.hpp"

#include <algorithm>
#include <cmath>

#include "cstc/error.hpp"

namespace cstc {

void ValidationMetric::validate() const {
    if (kind == Kind::ndcg_at_k && k < 1) throw InvalidInput("ndcg metric needs k >= 1");
}

double ValidationMetric::evaluate(const CstcTree& tree, const EvalSet& set) const {
    const Vector predictions = predict_all(tree, set.phi);
    if (kind == Kind::mse) return mean_squared_error(predictions, set.labels);
    return ndcg_at_k(predictions, set.labels, set.groups, k);
}

bool ValidationMetric::no_worse(double candidate, double reference, double tolerance) const {
    return kind == Kind::mse ? candidate <= reference + tolerance : candidate >= reference - tolerance;
}

bool ValidationMetric::better(double candidate, double reference) const {
    return kind == Kind::mse ? candidate < reference : candidate > reference;
}

PruneResult prune(const CstcTree& tree, const EvalSet& validation, const ValidationMetric& metric, double tolerance) {
    metric.validate();
    if (validation.phi.rows() < 1) throw InvalidInput("prune: empty validation set");
    if (!(tolerance >= 0.0)) throw InvalidInput("prune: tolerance must be >= 0");

    PruneResult result{tree, {}, {}};
    // original index of each current node
    std::vector<int> original(tree.num_nodes());
    for (int k = 0; k < tree.num_nodes(); ++k) original[k] = k;
    double current = metric.evaluate(result.tree, validation);
    result.trajectory.push_back(current);

    for (;;) {
        const CstcTree& t = result.tree;
        std::vector<int> candidates;
        for (int k = 1; k < t.num_nodes(); ++k)
            if (t.node(k).upper.is_terminal() && t.node(k).lower.is_terminal()) candidates.push_back(k);
        std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
            if (t.node(a).depth != t.node(b).depth) return t.node(a).depth > t.node(b).depth;
            const bool a_lower = t.node(t.node(a).parent).lower == ChildRef{ChildRef::Kind::classifier, a};
            const bool b_lower = t.node(t.node(b).parent).lower == ChildRef{ChildRef::Kind::classifier, b};
            if (a_lower != b_lower) return a_lower;
            return a < b;
        });

        bool accepted = false;
        for (int k : candidates) {
            std::vector<int> mapping;
            CstcTree trial = t.collapse(k, &mapping);
            const double score = metric.evaluate(trial, validation);
            if (!metric.no_worse(score, current, tolerance)) continue;
            result.removed.push_back(original[k]);
            std::vector<int> next(trial.num_nodes());
            for (std::size_t old = 0; old < mapping.size(); ++old)
                if (mapping[old] >= 0) next[mapping[old]] = original[old];
            original = std::move(next);
            result.tree = std::move(trial);
            current = score;
            result.trajectory.push_back(current);
            accepted = true;
            break;
        }
        if (!accepted) break;
    }
    return result;
}

FineTuneResult fine_tune(const CstcTree& tree, const Matrix& phi, const Vector& labels, const EvalSet* validation,
                         const ValidationMetric& metric, const FineTuneConfig& cfg) {
    metric.validate();
    cfg.opt.validate();
    if (phi.rows() < 1 || labels.size() != phi.rows()) throw InvalidInput("fine_tune: inconsistent training data");
    if (!(cfg.rho >= 0.0) || !(cfg.epsilon_aux > 0.0)) throw InvalidInput("fine_tune: invalid regularization");

    const TraversalState state = soft_probabilities(tree, phi);
    const auto n = static_cast<double>(phi.rows());
    FineTuneResult result{tree, {}, {}};
    CstcTree& out = result.tree;
    double best_score = validation ? metric.evaluate(out, *validation) : 0.0;
    if (validation) result.validation_trajectory.push_back(best_score);

    for (int k : tree.predictive_nodes()) {
        const Vector& beta = tree.node(k).beta;
        std::vector<Eigen::Index> support;
        for (Eigen::Index t = 0; t < beta.size(); ++t)
            if (is_active(beta[t])) support.push_back(t);
        FineTuneNodeReport report{k, static_cast<int>(support.size()), 0, false};

        auto scatter = [&](const Vector& w) {
            Vector full = Vector::Zero(beta.size());
            for (std::size_t s = 0; s < support.size(); ++s) full[support[s]] = w[static_cast<Eigen::Index>(s)];
            return full;
        };
        if (support.empty()) {
            out.node(k).tuned_beta = Vector::Zero(beta.size());
            result.nodes.push_back(report);
            continue;
        }

        const auto m = static_cast<Eigen::Index>(support.size());
        Matrix x(phi.rows(), m);
        Vector w(m);
        for (Eigen::Index s = 0; s < m; ++s) {
            x.col(s) = phi.col(support[s]);
            w[s] = beta[support[s]];
        }
        const Vector p = state.node_p.col(k);
        Vector best_w = w;
        out.node(k).tuned_beta = scatter(w);

        double previous = std::numeric_limits<double>::infinity();
        for (int round = 0; round < cfg.opt.alternations && !report.stopped_early; ++round) {
            const Vector z = aux_closed_form(w.array().square().matrix(), cfg.epsilon_aux);
            const ValueGradient f = [&](const Vector& at, Vector& grad) {
                const Vector r = x * at - labels;
                grad = (2.0 / n) * (x.transpose() * p.cwiseProduct(r));
                double value = p.dot(r.cwiseAbs2()) / n;
                if (cfg.rho > 0.0) {
                    grad.array() += cfg.rho * at.array() / z.array();
                    value += 0.5 * cfg.rho * (at.array().square() / z.array() + z.array()).sum();
                }
                return value;
            };
            Vector precond = (2.0 / n) * (x.array().square().matrix().transpose() * p);
            if (cfg.rho > 0.0) precond.array() += cfg.rho / z.array();
            precond = precond.cwiseMax(1e-12 * std::max(1.0, precond.maxCoeff()));

            const StepCallback on_step = [&](const Vector& at, double) {
                ++report.steps;
                if (!validation) return true;
                out.node(k).tuned_beta = scatter(at);
                const double score = metric.evaluate(out, *validation);
                if (!metric.no_worse(score, best_score)) {
                    report.stopped_early = true;
                    return false;
                }
                best_score = score;
                best_w = at;
                result.validation_trajectory.push_back(score);
                return true;
            };
            const CgOutcome cg = minimize_cg(f, w, precond, cfg.opt.cg_iters, 1e-3 * cfg.opt.tol, on_step);
            if (!cg.finite) throw NumericalError("fine_tune: non-finite loss at node " + std::to_string(k));
            if (!validation) best_w = w;
            if (previous - cg.loss <= cfg.opt.tol * std::max(std::abs(cg.loss), 1e-300)) break;
            previous = cg.loss;
        }
        out.node(k).tuned_beta = scatter(best_w);
        result.nodes.push_back(report);
    }
    return result;
}

}  // namespace cstc
