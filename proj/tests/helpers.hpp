#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "cstc/data.hpp"
#include "cstc/ensemble.hpp"
#include "cstc/model.hpp"
#include "cstc/objective.hpp"

namespace testutil {

using cstc::CstcTree;
using cstc::Matrix;
using cstc::Vector;

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
    return m;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double sd = 1.0) {
    return random_matrix(rng, n, 1, sd).col(0);
}

/// Random parameters on a full (or capped) tree; about `zero_share` of the weights are exactly zero.
inline CstcTree random_tree(std::mt19937_64& rng, int depth, int num_learners, double sd = 1.0,
                            double zero_share = 0.3, int max_nodes = 0) {
    CstcTree tree = max_nodes > 0 ? CstcTree::capped(depth, max_nodes, num_learners)
                                  : CstcTree::full(depth, num_learners);
    std::normal_distribution<double> g(0.0, sd);
    std::bernoulli_distribution zero(zero_share);
    for (int k = 0; k < tree.num_nodes(); ++k) {
        auto& node = tree.node(k);
        for (int t = 0; t < num_learners; ++t) node.beta[t] = zero(rng) ? 0.0 : g(rng);
        node.theta = g(rng);
    }
    return tree;
}

/// Binary d x T usage matrix with at least one feature per learner.
inline Matrix random_usage(std::mt19937_64& rng, int d, int num_learners) {
    std::bernoulli_distribution on(0.35);
    std::uniform_int_distribution<int> pick(0, d - 1);
    Matrix f = Matrix::Zero(d, num_learners);
    for (int t = 0; t < num_learners; ++t) {
        for (int a = 0; a < d; ++a) f(a, t) = on(rng) ? 1.0 : 0.0;
        f(pick(rng), t) = 1.0;
    }
    return f;
}

inline cstc::CostSchedule random_schedule(std::mt19937_64& rng, int d, int num_learners) {
    std::uniform_real_distribution<double> c(0.5, 5.0), e(0.0, 2.0);
    cstc::CostSchedule s;
    s.feature_costs.resize(d);
    s.learner_costs.resize(num_learners);
    for (int a = 0; a < d; ++a) s.feature_costs[a] = c(rng);
    for (int t = 0; t < num_learners; ++t) s.learner_costs[t] = e(rng);
    return s;
}

/// The hand-built quadrant tree over the identity map: the root reads sign(x),
/// its children read sign(z), and each depth-3 node predicts with its own y feature.
inline CstcTree perfect_synthetic_tree() {
    CstcTree tree = CstcTree::full(3, 6);
    tree.node(0).beta[0] = 1.0;
    tree.node(1).beta[1] = 1.0;
    tree.node(2).beta[1] = 1.0;
    for (int q = 0; q < 4; ++q) tree.node(3 + q).beta[2 + q] = 1.0;
    return tree;
}

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("cstc_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
