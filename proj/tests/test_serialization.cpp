#include "doctest.h"

#include "cstc/error.hpp"
#include "cstc/postprocess.hpp"
#include "cstc/serialization.hpp"
#include "helpers.hpp"

using namespace cstc;

namespace {

WeakLearnerEnsemble small_ensemble(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Matrix x = testutil::random_matrix(rng, 60, 4);
    return fit_gbrt(x, x.col(0) - 2.0 * x.col(3), GbrtConfig{6, 2, 0.3, 1});
}

void check_same_structure(const CstcTree& a, const CstcTree& b) {
    REQUIRE(a.num_nodes() == b.num_nodes());
    CHECK(a.num_terminals() == b.num_terminals());
    for (int k = 0; k < a.num_nodes(); ++k) {
        const auto &x = a.node(k), &y = b.node(k);
        CHECK(x.beta == y.beta);
        CHECK(x.theta == y.theta);
        CHECK(x.parent == y.parent);
        CHECK(x.depth == y.depth);
        CHECK(x.upper == y.upper);
        CHECK(x.lower == y.lower);
        REQUIRE(x.tuned_beta.has_value() == y.tuned_beta.has_value());
        if (x.tuned_beta) CHECK(*x.tuned_beta == *y.tuned_beta);
    }
}

}  // namespace

TEST_CASE("ensembles round-trip through JSON") {
    const auto e = small_ensemble(1);
    testutil::TempDir dir;
    save_ensemble(dir.file("e.json"), e);
    const auto back = load_ensemble(dir.file("e.json"));
    CHECK(ensemble_hash(back) == ensemble_hash(e));
    CHECK(back.usage() == e.usage());
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
        const Vector x = testutil::random_vector(rng, 4);
        CHECK(back.feature_map(x) == e.feature_map(x));
    }
    const auto id = ensemble_from_json(ensemble_to_json(WeakLearnerEnsemble::identity(3)));
    CHECK(id.mode() == WeakLearnerEnsemble::Mode::identity);
    CHECK(ensemble_hash(id) == ensemble_hash(WeakLearnerEnsemble::identity(3)));
    CHECK(ensemble_hash(id) != ensemble_hash(e));
}

TEST_CASE("inconsistent ensemble documents are refused") {
    const auto e = small_ensemble(3);
    auto j = ensemble_to_json(e);
    j["usage"] = nlohmann::json::array();
    CHECK_THROWS_AS(ensemble_from_json(j), InvalidInput);
    j = ensemble_to_json(e);
    j["mode"] = "mystery";
    CHECK_THROWS_AS(ensemble_from_json(j), InvalidInput);
    j = ensemble_to_json(e);
    j.erase("trees");
    CHECK_THROWS_AS(ensemble_from_json(j), InvalidInput);
    j = ensemble_to_json(e);
    j["num_learners"] = 99;
    CHECK_THROWS_AS(ensemble_from_json(j), InvalidInput);
}

TEST_CASE("models round-trip with identical predictions") {
    const auto e = small_ensemble(4);
    std::mt19937_64 rng(5);
    testutil::TempDir dir;
    for (int trial = 0; trial < 5; ++trial) {
        const auto t = testutil::random_tree(rng, 1 + trial % 4, e.num_learners(), 1.0, 0.4, trial == 3 ? 6 : 0);
        save_model(dir.file("m.json"), t, e);
        const auto back = load_model(dir.file("m.json"), e);
        check_same_structure(t, back);
        const Matrix phi = e.transform(testutil::random_matrix(rng, 30, 4));
        CHECK((predict_all(back, phi) - predict_all(t, phi)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("pruned and fine-tuned models keep their topology and tuned weights") {
    const auto e = small_ensemble(6);
    std::mt19937_64 rng(7);
    const Matrix phi = e.transform(testutil::random_matrix(rng, 80, 4));
    const Vector y = phi.rowwise().sum();
    const auto t = testutil::random_tree(rng, 3, e.num_learners(), 0.5, 0.5);
    const auto pruned = prune(t, EvalSet{phi, y, {}}, ValidationMetric{}, 0.5).tree;
    const auto tuned = fine_tune(pruned, phi, y, nullptr, ValidationMetric{}, FineTuneConfig{}).tree;
    testutil::TempDir dir;
    save_model(dir.file("m.json"), tuned, e);
    check_same_structure(tuned, load_model(dir.file("m.json"), e));
}

TEST_CASE("model loading checks the ensemble hash and schema version") {
    const auto e = small_ensemble(8);
    const auto t = CstcTree::full(2, e.num_learners());
    const std::string sha = ensemble_hash(e);
    auto j = model_to_json(t, sha);
    CHECK_NOTHROW(model_from_json(j, sha));
    CHECK_THROWS_AS(model_from_json(j, ensemble_hash(small_ensemble(9))), InvalidInput);
    j["ensemble_sha256"] = std::string(64, '0');
    CHECK_THROWS_AS(model_from_json(j, sha), InvalidInput);
    j = model_to_json(t, sha);
    j["schema_version"] = kModelSchemaVersion + 1;
    CHECK_THROWS_AS(model_from_json(j, sha), InvalidInput);
    j = model_to_json(t, sha);
    j["nodes"][1]["beta"] = nlohmann::json::array({nlohmann::json::array({500, 1.0})});
    CHECK_THROWS_AS(model_from_json(j, sha), InvalidInput);
    j = model_to_json(t, sha);
    j["nodes"][2]["parent"] = 1;
    CHECK_THROWS_AS(model_from_json(j, sha), InvalidInput);

    testutil::TempDir dir;
    write_text(dir.file("bad.json"), "{ not json");
    CHECK_THROWS_AS(load_model(dir.file("bad.json"), e), ParseError);
    CHECK_THROWS_AS(load_model(dir.file("absent.json"), e), ParseError);
    CHECK_THROWS_AS(save_model(dir.file("m.json"), CstcTree::full(1, 2), e), InvalidInput);
}
