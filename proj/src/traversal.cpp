#include "cstc/traversal.hpp"

#include <string>

#include "cstc/error.hpp"

namespace cstc {

Matrix node_scores(const CstcTree& tree, const Matrix& phi) {
    if (phi.cols() != tree.num_learners())
        throw InvalidInput("phi has " + std::to_string(phi.cols()) + " columns, tree expects " +
                           std::to_string(tree.num_learners()));
    Matrix weights(tree.num_learners(), tree.num_nodes());
    for (int k = 0; k < tree.num_nodes(); ++k) weights.col(k) = tree.node(k).beta;
    return phi * weights;
}

TraversalState soft_probabilities_from_scores(const CstcTree& tree, const Matrix& scores) {
    const Eigen::Index n = scores.rows();
    TraversalState s;
    s.node_p.resize(n, tree.num_nodes());
    s.upper_p.resize(n, tree.num_nodes());
    s.terminal_p.resize(n, tree.num_terminals());
    s.node_p.col(0).setOnes();
    // parents precede children, so one forward pass suffices
    for (int k = 0; k < tree.num_nodes(); ++k) {
        const ClassifierNode& node = tree.node(k);
        for (Eigen::Index i = 0; i < n; ++i) s.upper_p(i, k) = sigmoid(scores(i, k) - node.theta);
        const auto reach = s.node_p.col(k).array();
        const auto up = s.upper_p.col(k).array();
        auto upper_col = reach * up;
        auto lower_col = reach * (1.0 - up);
        if (node.upper.is_terminal())
            s.terminal_p.col(node.upper.index) = upper_col;
        else
            s.node_p.col(node.upper.index) = upper_col;
        if (node.lower.is_terminal())
            s.terminal_p.col(node.lower.index) = lower_col;
        else
            s.node_p.col(node.lower.index) = lower_col;
    }
    s.marginals = n > 0 ? Vector(s.terminal_p.colwise().mean().transpose()) : Vector::Zero(tree.num_terminals());
    return s;
}

TraversalState soft_probabilities(const CstcTree& tree, const Matrix& phi) {
    return soft_probabilities_from_scores(tree, node_scores(tree, phi));
}

Route hard_route(const CstcTree& tree, const Eigen::Ref<const Vector>& phi_row) {
    if (phi_row.size() != tree.num_learners()) throw InvalidInput("hard_route: feature vector has wrong length");
    Route r;
    int k = 0;
    for (;;) {
        r.path.push_back(k);
        const ClassifierNode& node = tree.node(k);
        const ChildRef& next = phi_row.dot(node.beta) > node.theta ? node.upper : node.lower;
        if (next.is_terminal()) {
            r.terminal = next.index;
            return r;
        }
        k = next.index;
    }
}

double predict(const CstcTree& tree, const Eigen::Ref<const Vector>& phi_row) {
    const Route r = hard_route(tree, phi_row);
    return phi_row.dot(tree.node(r.path.back()).prediction_weights());
}

Vector predict_all(const CstcTree& tree, const Matrix& phi) {
    Vector out(phi.rows());
    for (Eigen::Index i = 0; i < phi.rows(); ++i) out[i] = predict(tree, phi.row(i).transpose());
    return out;
}

}  // namespace cstc
