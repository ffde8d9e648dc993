#pragma once

#include <cmath>
#include <vector>

#include "cstc/model.hpp"

namespace cstc {

/// Logistic function in branch form; exact for large |a| without overflow.
inline double sigmoid(double a) noexcept {
    if (a >= 0.0) {
        const double e = std::exp(-a);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(a);
    return e / (1.0 + e);
}

/// Soft traversal probabilities for a batch of inputs.
struct TraversalState {
    Matrix node_p;      // n x |V|, p_i^k
    Matrix terminal_p;  // n x |L|, p_i^l
    Vector marginals;   // |L|, p^l = mean_i p_i^l
    Matrix upper_p;     // n x |V|, sigma(phi_i^T beta^k - theta^k)
};

/// n x |V| matrix of node outputs phi_i^T beta^k (routing weights).
Matrix node_scores(const CstcTree& tree, const Matrix& phi);

TraversalState soft_probabilities(const CstcTree& tree, const Matrix& phi);
/// Same, from precomputed node scores.
TraversalState soft_probabilities_from_scores(const CstcTree& tree, const Matrix& scores);

struct Route {
    int terminal = -1;
    std::vector<int> path;
};

/// Goes upper iff phi^T beta^k > theta^k; ties go lower.
Route hard_route(const CstcTree& tree, const Eigen::Ref<const Vector>& phi_row);

/// Prediction of the routed terminal's parent, using fine-tuned weights when present.
double predict(const CstcTree& tree, const Eigen::Ref<const Vector>& phi_row);
Vector predict_all(const CstcTree& tree, const Matrix& phi);

}  // namespace cstc
