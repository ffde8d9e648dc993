#include "doctest.h"

#include "cstc/ensemble.hpp"
#include "cstc/error.hpp"
#include "helpers.hpp"

using namespace cstc;

namespace {

RegressionTree leaf(double v) {
    RegressionTree t;
    t.nodes.push_back({-1, 0.0, -1, -1, v});
    return t;
}

RegressionTree stump(int feature, double threshold, double left, double right) {
    RegressionTree t;
    t.nodes.push_back({feature, threshold, 1, 2, 0.0});
    t.nodes.push_back({-1, 0.0, -1, -1, left});
    t.nodes.push_back({-1, 0.0, -1, -1, right});
    return t;
}

double training_mse(const WeakLearnerEnsemble& e, const Matrix& x, const Vector& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) s += std::pow(e.predict(x.row(i).transpose()) - y[i], 2);
    return s / static_cast<double>(x.rows());
}

}  // namespace

TEST_CASE("constant labels give H' equal to the constant") {
    std::mt19937_64 rng(3);
    const Matrix x = testutil::random_matrix(rng, 30, 3);
    const Vector y = Vector::Constant(30, 5.0);
    const auto e = fit_gbrt(x, y, GbrtConfig{1, 3, 0.1, 1});
    REQUIRE(e.num_learners() == 1);
    for (int i = 0; i < 10; ++i) CHECK(e.predict(testutil::random_vector(rng, 3)) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("a depth-one tree on step data separates the signs") {
    Matrix x(20, 1);
    Vector y(20);
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = -1.0 + 0.1 * i + (i >= 10 ? 0.05 : 0.0);
        y[i] = x(i, 0) > 0 ? 1.0 : 0.0;
    }
    const auto e = fit_gbrt(x, y, GbrtConfig{1, 1, 1.0, 1});
    const RegressionTree& t = e.trees().front();
    REQUIRE(t.nodes.size() == 3);
    CHECK(t.nodes[0].feature == 0);
    CHECK(t.nodes[0].threshold > x(9, 0));
    CHECK(t.nodes[0].threshold < x(10, 0));
    for (int i = 0; i < 20; ++i) CHECK(e.predict(x.row(i).transpose()) == doctest::Approx(y[i]).epsilon(1e-12));
}

TEST_CASE("more boosting rounds lower the training error") {
    std::mt19937_64 rng(11);
    const Matrix x = testutil::random_matrix(rng, 50, 4);
    Vector y(50);
    for (int i = 0; i < 50; ++i) y[i] = std::sin(x(i, 0)) + x(i, 1) * x(i, 2) + 0.1 * x(i, 3);
    const double one = training_mse(fit_gbrt(x, y, GbrtConfig{1, 3, 0.1, 1}), x, y);
    const double twenty = training_mse(fit_gbrt(x, y, GbrtConfig{20, 3, 0.1, 1}), x, y);
    CHECK(twenty < one);
}

TEST_CASE("H' is the sum of the feature map and the usage matrix matches the splits") {
    std::mt19937_64 rng(5);
    const Matrix x = testutil::random_matrix(rng, 80, 6);
    const Vector y = testutil::random_vector(rng, 80);
    const auto e = fit_gbrt(x, y, GbrtConfig{15, 2, 0.3, 2});
    for (int i = 0; i < 20; ++i) {
        const Vector v = testutil::random_vector(rng, 6);
        CHECK(e.feature_map(v).sum() == doctest::Approx(e.predict(v)).epsilon(1e-12));
    }
    const Matrix phi = e.transform(x);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        CHECK((phi.row(i).transpose() - e.feature_map(x.row(i).transpose())).norm() == 0.0);
    for (int t = 0; t < e.num_learners(); ++t) {
        std::vector<int> used;
        for (int a = 0; a < e.num_features(); ++a)
            if (e.usage()(a, t) != 0.0) used.push_back(a);
        CHECK(used == e.trees()[t].used_features());
    }
}

TEST_CASE("fixed data and configuration give identical ensembles") {
    std::mt19937_64 rng(8);
    const Matrix x = testutil::random_matrix(rng, 60, 5);
    const Vector y = testutil::random_vector(rng, 60);
    const auto a = fit_gbrt(x, y, GbrtConfig{10, 3, 0.2, 1});
    const auto b = fit_gbrt(x, y, GbrtConfig{10, 3, 0.2, 1});
    REQUIRE(a.num_learners() == b.num_learners());
    for (int t = 0; t < a.num_learners(); ++t) {
        REQUIRE(a.trees()[t].nodes.size() == b.trees()[t].nodes.size());
        for (std::size_t j = 0; j < a.trees()[t].nodes.size(); ++j) {
            CHECK(a.trees()[t].nodes[j].feature == b.trees()[t].nodes[j].feature);
            CHECK(a.trees()[t].nodes[j].threshold == b.trees()[t].nodes[j].threshold);
            CHECK(a.trees()[t].nodes[j].value == b.trees()[t].nodes[j].value);
        }
    }
}

TEST_CASE("equal split gains resolve to the lower feature index") {
    std::mt19937_64 rng(2);
    Matrix x(40, 2);
    x.col(0) = testutil::random_vector(rng, 40);
    x.col(1) = x.col(0);
    const Vector y = (x.col(0).array() > 0.0).cast<double>().matrix();
    const auto e = fit_gbrt(x, y, GbrtConfig{1, 1, 1.0, 1});
    CHECK(e.trees().front().nodes.front().feature == 0);
}

TEST_CASE("feature map of fixed trees") {
    SUBCASE("single leaf") {
        const auto e = WeakLearnerEnsemble::from_trees(2, {leaf(3.0)}, Vector::Ones(1));
        const Vector phi = e.feature_map(Vector::Random(2));
        REQUIRE(phi.size() == 1);
        CHECK(phi[0] == 3.0);
        CHECK(e.usage().col(0).isZero());
    }
    SUBCASE("stump on feature 0 at 0") {
        const auto e = WeakLearnerEnsemble::from_trees(3, {stump(0, 0.0, -1.0, 1.0)}, Vector::Ones(1));
        CHECK(e.feature_map(Vector{{0.5, 4.0, -2.0}})[0] == 1.0);
        CHECK(e.feature_map(Vector{{-0.5, 4.0, -2.0}})[0] == -1.0);
        CHECK(e.feature_map(Vector{{0.0, 4.0, -2.0}})[0] == -1.0);
    }
    SUBCASE("usage column of a tree splitting only on feature 2") {
        RegressionTree t;
        t.nodes.push_back({2, 0.0, 1, 2, 0.0});
        t.nodes.push_back({2, -1.0, 3, 4, 0.0});
        t.nodes.push_back({-1, 0.0, -1, -1, 1.0});
        t.nodes.push_back({-1, 0.0, -1, -1, 2.0});
        t.nodes.push_back({-1, 0.0, -1, -1, 3.0});
        const auto e = WeakLearnerEnsemble::from_trees(4, {t, leaf(1.0)}, Vector::Ones(2));
        CHECK(e.usage().col(0) == Vector{{0.0, 0.0, 1.0, 0.0}});
        CHECK(e.usage().col(1).isZero());
    }
}

TEST_CASE("identity ensemble is the bypass map") {
    const auto e = WeakLearnerEnsemble::identity(6);
    CHECK(e.mode() == WeakLearnerEnsemble::Mode::identity);
    CHECK(e.usage() == Matrix::Identity(6, 6));
    CHECK(e.eval_costs().isZero());
    const Vector x{{1.0, -1.0, 0.3, 2.0, -5.0, 7.5}};
    CHECK(e.feature_map(x) == x);
    CHECK(e.predict(x) == doctest::Approx(x.sum()));
}

TEST_CASE("ensemble construction rejects bad input") {
    CHECK_THROWS_AS(WeakLearnerEnsemble::identity(0), InvalidInput);
    CHECK_THROWS_AS(WeakLearnerEnsemble::from_trees(2, {}, Vector()), InvalidInput);
    CHECK_THROWS_AS(WeakLearnerEnsemble::from_trees(2, {stump(5, 0.0, 0, 1)}, Vector::Ones(1)), InvalidInput);
    CHECK_THROWS_AS(WeakLearnerEnsemble::from_trees(2, {leaf(1.0)}, Vector::Ones(2)), InvalidInput);
    RegressionTree dangling;
    dangling.nodes.push_back({0, 0.0, 1, 7, 0.0});
    dangling.nodes.push_back({-1, 0.0, -1, -1, 0.0});
    CHECK_THROWS_AS(WeakLearnerEnsemble::from_trees(2, {dangling}, Vector::Ones(1)), InvalidInput);
    auto e = WeakLearnerEnsemble::identity(2);
    CHECK_THROWS_AS(e.set_eval_costs(Vector{{1.0, -1.0}}), InvalidInput);
    CHECK_THROWS_AS(e.feature_map(Vector::Zero(3)), InvalidInput);

    const Matrix x = Matrix::Ones(4, 2);
    CHECK_THROWS_AS(fit_gbrt(Matrix(0, 2), Vector(0), GbrtConfig{}), InvalidInput);
    CHECK_THROWS_AS(fit_gbrt(x, Vector::Ones(3), GbrtConfig{}), InvalidInput);
    CHECK_THROWS_AS(fit_gbrt(x, Vector::Ones(4), GbrtConfig{0, 2, 0.1, 1}), InvalidInput);
    CHECK_THROWS_AS(fit_gbrt(x, Vector::Ones(4), GbrtConfig{1, 0, 0.1, 1}), InvalidInput);
    CHECK_THROWS_AS(fit_gbrt(x, Vector::Ones(4), GbrtConfig{1, 2, 0.0, 1}), InvalidInput);
    Matrix bad = x;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(fit_gbrt(bad, Vector::Ones(4), GbrtConfig{}), InvalidInput);
}
