#include "doctest.h"

#include "cstc/data.hpp"
#include "cstc/error.hpp"
#include "cstc/traversal.hpp"
#include "helpers.hpp"

using namespace cstc;

TEST_CASE("zero parameters split every transition evenly") {
    const auto t = CstcTree::full(2, 3);
    std::mt19937_64 rng(1);
    const auto s = soft_probabilities(t, testutil::random_matrix(rng, 5, 3));
    CHECK((s.upper_p.array() == 0.5).all());
    CHECK((s.terminal_p.array() == 0.25).all());
    CHECK((s.marginals.array() == 0.25).all());
}

TEST_CASE("a saturated node sends everything up") {
    auto t = CstcTree::full(1, 1);
    t.node(0).beta[0] = 1.0;
    Matrix phi(1, 1);
    phi(0, 0) = 30.0;
    const auto s = soft_probabilities(t, phi);
    CHECK(std::abs(s.terminal_p(0, 0) - 1.0) < 1e-12);
    CHECK(s.terminal_p(0, 1) < 1e-12);
}

TEST_CASE("sigmoid is stable at extreme arguments") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(-800.0) == 0.0);
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(sigmoid(-30.0) > 0.0);
    CHECK(sigmoid(3.0) + sigmoid(-3.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("probability mass is conserved on random trees") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const int depth = 1 + trial % 4;
        const auto t = testutil::random_tree(rng, depth, 5, 2.0, 0.2, trial % 3 == 0 ? 5 : 0);
        const auto s = soft_probabilities(t, testutil::random_matrix(rng, 12, 5));
        const Vector row_sums = s.terminal_p.rowwise().sum();
        CHECK((row_sums.array() - 1.0).abs().maxCoeff() < 1e-12);
        for (int k = 0; k < t.num_nodes(); ++k) {
            const auto& n = t.node(k);
            auto mass = [&](const ChildRef& c) {
                return c.is_terminal() ? Vector(s.terminal_p.col(c.index)) : Vector(s.node_p.col(c.index));
            };
            CHECK((s.node_p.col(k) - mass(n.upper) - mass(n.lower)).cwiseAbs().maxCoeff() < 1e-12);
        }
        CHECK(std::abs(s.marginals.sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("hard routing") {
    SUBCASE("ties go to the lower terminal") {
        const auto t = CstcTree::full(1, 2);
        const Route r = hard_route(t, Vector::Ones(2));
        CHECK(r.terminal == 1);
        CHECK(r.path == std::vector<int>{0});
    }
    SUBCASE("quadrant tree routes each quadrant to its own predictor") {
        const auto t = testutil::perfect_synthetic_tree();
        SyntheticConfig cfg;
        cfg.n = 200;
        const auto set = generate_synthetic(cfg);
        for (Eigen::Index i = 0; i < set.data.size(); ++i) {
            const Vector row = set.data.features.row(i).transpose();
            const Route r = hard_route(t, row);
            CHECK(r.path.back() == 3 + set.quadrant[i]);
            CHECK(predict(t, row) == row[2 + set.quadrant[i]]);
            CHECK(predict(t, row) == set.data.labels[i]);
        }
    }
    SUBCASE("every step follows the likelier child") {
        std::mt19937_64 rng(4);
        for (int trial = 0; trial < 20; ++trial) {
            const auto t = testutil::random_tree(rng, 3, 4);
            const Matrix phi = testutil::random_matrix(rng, 10, 4);
            const auto s = soft_probabilities(t, phi);
            for (Eigen::Index i = 0; i < phi.rows(); ++i) {
                const Route r = hard_route(t, phi.row(i).transpose());
                for (std::size_t j = 0; j + 1 < r.path.size(); ++j) {
                    const bool up = t.node(r.path[j]).upper == ChildRef{ChildRef::Kind::classifier, r.path[j + 1]};
                    CHECK((s.upper_p(i, r.path[j]) > 0.5) == up);
                }
            }
        }
    }
    SUBCASE("with sharp transitions the hard route is the most probable terminal") {
        std::mt19937_64 rng(6);
        for (int trial = 0; trial < 20; ++trial) {
            auto t = testutil::random_tree(rng, 3, 4);
            for (int k = 0; k < t.num_nodes(); ++k) {
                t.node(k).beta *= 1e3;
                t.node(k).theta *= 1e3;
            }
            const Matrix phi = testutil::random_matrix(rng, 10, 4);
            const auto s = soft_probabilities(t, phi);
            for (Eigen::Index i = 0; i < phi.rows(); ++i) {
                Eigen::Index best = 0;
                s.terminal_p.row(i).maxCoeff(&best);
                CHECK(hard_route(t, phi.row(i).transpose()).terminal == best);
            }
        }
    }
}

TEST_CASE("prediction reads the routed node's weights") {
    auto t = CstcTree::full(1, 3);
    t.node(0).beta = Vector{{1.0, 0.0, 0.0}};
    CHECK(predict(t, Vector{{2.0, 5.0, 7.0}}) == 2.0);
    CHECK(predict(CstcTree::full(2, 3), Vector{{2.0, 5.0, 7.0}}) == 0.0);

    t.node(0).tuned_beta = Vector{{0.0, 1.0, 0.0}};
    CHECK(predict(t, Vector{{2.0, 5.0, 7.0}}) == 5.0);
    CHECK(hard_route(t, Vector{{2.0, 5.0, 7.0}}).terminal == 0);
    CHECK(predict_all(t, Matrix::Ones(3, 3)) == Vector::Ones(3));
}

TEST_CASE("traversal rejects mismatched widths") {
    const auto t = CstcTree::full(2, 3);
    CHECK_THROWS_AS(soft_probabilities(t, Matrix::Zero(2, 4)), InvalidInput);
    CHECK_THROWS_AS(hard_route(t, Vector::Zero(2)), InvalidInput);
}
