#include "doctest.h"

#include "cstc/error.hpp"
#include "cstc/postprocess.hpp"
#include "helpers.hpp"

using namespace cstc;

namespace {

// Column 0 is a +-1 sign, column 1 the label itself, column 2 noise.
EvalSet signed_set(std::uint64_t seed, int n) {
    std::mt19937_64 rng(seed);
    EvalSet s;
    s.phi = testutil::random_matrix(rng, n, 3);
    s.labels = testutil::random_vector(rng, n);
    for (int i = 0; i < n; ++i) {
        s.phi(i, 0) = i % 2 ? 1.0 : -1.0;
        s.phi(i, 1) = s.labels[i];
    }
    return s;
}

}  // namespace

TEST_CASE("children that repeat the root's prediction are pruned") {
    const EvalSet v = signed_set(1, 40);
    CstcTree t = CstcTree::full(2, 3);
    for (int k = 0; k < 3; ++k) t.node(k).beta = Vector{{0.3, 0.5, -0.2}};
    const auto r = prune(t, v, ValidationMetric{});
    CHECK(r.tree.num_nodes() == 1);
    CHECK(r.removed == std::vector<int>{2, 1});
    CHECK(r.trajectory.size() == 3);
}

TEST_CASE("children that each improve validation error stay") {
    const EvalSet v = signed_set(2, 40);
    CstcTree t = CstcTree::full(2, 3);
    t.node(0).beta = Vector{{1.0, 0.0, 0.0}};
    t.node(1).beta = Vector{{0.0, 1.0, 0.0}};
    t.node(2).beta = Vector{{0.0, 1.0, 0.0}};
    const auto r = prune(t, v, ValidationMetric{});
    CHECK(r.tree.num_nodes() == 3);
    CHECK(r.removed.empty());
}

TEST_CASE("pruning tries the deepest nodes first and never worsens the metric") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto t = testutil::random_tree(rng, 4, 3, 0.5, 0.3);
        EvalSet v;
        v.phi = testutil::random_matrix(rng, 50, 3);
        v.labels = v.phi.col(0) + 0.2 * testutil::random_vector(rng, 50);
        const auto r = prune(t, v, ValidationMetric{}, 0.0);
        r.tree.validate();
        for (std::size_t i = 1; i < r.trajectory.size(); ++i) CHECK(r.trajectory[i] <= r.trajectory[i - 1]);
        CHECK(r.trajectory.back() == doctest::Approx(ValidationMetric{}.evaluate(r.tree, v)));
        if (!r.removed.empty()) CHECK(t.node(r.removed.front()).depth >= 2);
    }
}

TEST_CASE("pruning with NDCG") {
    EvalSet v = signed_set(4, 20);
    v.labels = (v.labels.array().abs() * 2.0).floor().min(4.0).matrix();
    v.phi.col(1) = v.labels;
    v.groups = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {10, 11, 12, 13, 14, 15, 16, 17, 18, 19}};
    CstcTree t = CstcTree::full(2, 3);
    for (int k = 0; k < 3; ++k) t.node(k).beta = Vector{{0.0, 1.0, 0.0}};
    const ValidationMetric m{ValidationMetric::Kind::ndcg_at_k, 5};
    const auto r = prune(t, v, m);
    CHECK(r.tree.num_nodes() == 1);
    CHECK(r.trajectory.back() == 1.0);
    CHECK_THROWS_AS(prune(t, v, ValidationMetric{ValidationMetric::Kind::ndcg_at_k, 0}), InvalidInput);
    CHECK_THROWS_AS(prune(t, v, m, -1.0), InvalidInput);
}

TEST_CASE("fine-tuning clamps zero weights") {
    const EvalSet s = signed_set(5, 30);
    const auto r = fine_tune(CstcTree::full(1, 3), s.phi, s.labels, nullptr, ValidationMetric{}, FineTuneConfig{});
    REQUIRE(r.tree.node(0).tuned_beta);
    CHECK(r.tree.node(0).tuned_beta->isZero());
}

TEST_CASE("fine-tuning without penalty solves the weighted normal equations") {
    std::mt19937_64 rng(6);
    const Matrix phi = testutil::random_matrix(rng, 5, 3);
    const Vector y = testutil::random_vector(rng, 5);
    CstcTree t = CstcTree::full(2, 3);
    t.node(0).beta = Vector{{0.8, -0.4, 0.3}};
    t.node(0).theta = 0.1;
    t.node(1).beta = Vector{{0.5, 0.5, 0.5}};
    t.node(2).beta = Vector{{-0.2, 0.0, 0.7}};
    FineTuneConfig cfg;
    cfg.opt.cg_iters = 500;
    cfg.opt.alternations = 5;
    cfg.opt.tol = 1e-14;
    const auto r = fine_tune(t, phi, y, nullptr, ValidationMetric{}, cfg);

    const auto state = soft_probabilities(t, phi);
    for (int k : {1, 2}) {
        std::vector<Eigen::Index> support;
        for (Eigen::Index j = 0; j < 3; ++j)
            if (t.node(k).beta[j] != 0.0) support.push_back(j);
        Matrix x(5, static_cast<Eigen::Index>(support.size()));
        for (std::size_t j = 0; j < support.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = phi.col(support[j]);
        const Matrix p = state.node_p.col(k).asDiagonal();
        const Vector w = (x.transpose() * p * x).ldlt().solve(x.transpose() * p * y);
        for (std::size_t j = 0; j < support.size(); ++j)
            CHECK((*r.tree.node(k).tuned_beta)[support[j]] == doctest::Approx(w[static_cast<Eigen::Index>(j)]).epsilon(1e-6));
        if (k == 2) CHECK((*r.tree.node(k).tuned_beta)[1] == 0.0);
    }
    CHECK_FALSE(r.tree.node(0).tuned_beta);
}

TEST_CASE("fine-tuning keeps supports and routes") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 8; ++trial) {
        const auto t = testutil::random_tree(rng, 3, 4, 0.6, 0.4);
        const Matrix phi = testutil::random_matrix(rng, 60, 4);
        const Vector y = phi.col(0) - phi.col(2) + 0.1 * testutil::random_vector(rng, 60);
        EvalSet valid{testutil::random_matrix(rng, 30, 4), Vector(), {}};
        valid.labels = valid.phi.col(0) - valid.phi.col(2);
        FineTuneConfig cfg;
        cfg.rho = trial % 2 ? 0.01 : 0.0;
        const auto r = fine_tune(t, phi, y, trial % 3 ? &valid : nullptr, ValidationMetric{}, cfg);
        for (int k : t.predictive_nodes()) {
            const Vector& tuned = *r.tree.node(k).tuned_beta;
            for (int j = 0; j < 4; ++j)
                if (t.node(k).beta[j] == 0.0) CHECK(tuned[j] == 0.0);
            CHECK(r.tree.node(k).beta == t.node(k).beta);
        }
        for (Eigen::Index i = 0; i < phi.rows(); ++i)
            CHECK(hard_route(r.tree, phi.row(i).transpose()).terminal == hard_route(t, phi.row(i).transpose()).terminal);
        for (std::size_t i = 1; i < r.validation_trajectory.size(); ++i)
            CHECK(r.validation_trajectory[i] <= r.validation_trajectory[i - 1]);
    }
}
