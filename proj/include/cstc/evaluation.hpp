#pragma once

#include <map>
#include <vector>

#include "cstc/objective.hpp"

namespace cstc {

/// Inputs already mapped through the ensemble, with labels and query groups.
/// An empty `groups` means the whole set is one group.
struct EvalSet {
    Matrix phi;
    Vector labels;
    std::vector<std::vector<Eigen::Index>> groups;
};

double mean_squared_error(const Vector& predictions, const Vector& labels);

/// Mean over queries of DCG@k / IDCG@k with gain 2^y - 1 and discount
/// 1 / log2(rank + 1). Queries whose ideal DCG is zero score 1. Equal
/// predictions keep input order.
double ndcg_at_k(const Vector& predictions, const Vector& labels,
                 const std::vector<std::vector<Eigen::Index>>& groups, int k);

struct InstanceCost {
    int terminal = -1;
    double evaluation_cost = 0.0;
    double extraction_cost = 0.0;
    double total = 0.0;
};

struct DepthFractions {
    double cost_group = 0.0;   // bucket upper bound (a cost level or a decile edge)
    int num_features = 0;
    std::vector<double> by_depth;  // index 0 is depth 1
};

struct CostReport {
    std::vector<InstanceCost> per_instance;
    double mean_total = 0.0;
    std::vector<DepthFractions> per_depth_feature_fractions;
};

/// Hard-routes every row of `data` (raw features) and meters learners and
/// features on demand along the visited path, each charged at first use.
CostReport evaluate_cost(const CstcTree& tree, const WeakLearnerEnsemble& ensemble, const CostSchedule& schedule,
                         const Matrix& data);

/// Raw features extracted by node k's own evaluated weights.
std::vector<char> node_features(const CstcTree& tree, int k, const Matrix& usage);
/// Raw features extracted by the time node k has run: its own plus its ancestors'.
std::vector<char> cumulative_features(const CstcTree& tree, int k, const Matrix& usage);

/// Fraction of each cost group's features extracted by nodes at each depth
/// (path-cumulative, union over the nodes at that depth). Groups are the
/// levels {1, 5, 20, 50, 100, 150, 200} when every cost is one of them,
/// otherwise cost deciles.
std::vector<DepthFractions> depth_feature_fractions(const CstcTree& tree, const CostSchedule& schedule,
                                                    const Matrix& usage);

struct JaccardMatrix {
    std::vector<int> nodes;  // predictive classifiers, breadth-first
    Matrix values;
};

double jaccard(const std::vector<char>& a, const std::vector<char>& b);
JaccardMatrix jaccard_matrix(const CstcTree& tree, const Matrix& usage);

/// Mean label of the hard-routed inputs passing through each node (NaN if none).
Vector node_label_means(const CstcTree& tree, const Matrix& phi, const Vector& labels);

}  // namespace cstc
