#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace cstc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Array-backed CART regression tree. Node 0 is the root.
struct RegressionTree {
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;  // x[feature] <= threshold
        int right = -1;
        double value = 0.0;

        bool is_leaf() const noexcept { return feature < 0; }
    };

    std::vector<Node> nodes;

    double evaluate(const Eigen::Ref<const Vector>& x) const;
    int depth() const;
    /// Sorted, de-duplicated list of features the tree splits on.
    std::vector<int> used_features() const;
};

struct GbrtConfig {
    int rounds = 100;
    int max_depth = 4;
    double shrinkage = 0.1;
    int min_samples_leaf = 1;
};

/// The feature map phi(x) = [h_1(x), ..., h_T(x)] together with the
/// feature-usage matrix F (d x T) and per-learner evaluation costs e_t.
///
/// Two modes exist. A boosted ensemble holds T regression trees; the label
/// mean is folded into the first learner so that H'(x) = sum_t h_t(x)
/// exactly. The identity ensemble ("bypass") maps phi(x) = x with F = I and
/// zero evaluation costs, for data whose raw features are used directly.
class WeakLearnerEnsemble {
public:
    enum class Mode { boosted, identity };

    static WeakLearnerEnsemble identity(int num_features);
    static WeakLearnerEnsemble from_trees(int num_features, std::vector<RegressionTree> trees,
                                          Vector eval_costs);

    Mode mode() const noexcept { return mode_; }
    int num_features() const noexcept { return num_features_; }
    int num_learners() const noexcept { return num_learners_; }
    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
    const Vector& eval_costs() const noexcept { return eval_costs_; }
    void set_eval_costs(Vector costs);

    /// d x T binary usage matrix (stored as doubles for linear algebra).
    const Matrix& usage() const noexcept { return usage_; }

    Vector feature_map(const Eigen::Ref<const Vector>& x) const;
    /// Row-wise feature map of an n x d data matrix; returns n x T.
    Matrix transform(const Matrix& data) const;
    /// H'(x), the stage-wise regression output.
    double predict(const Eigen::Ref<const Vector>& x) const;

private:
    WeakLearnerEnsemble() = default;
    void rebuild_usage();

    Mode mode_ = Mode::identity;
    int num_features_ = 0;
    int num_learners_ = 0;
    std::vector<RegressionTree> trees_;
    Vector eval_costs_;
    Matrix usage_;
};

/// Least-squares gradient boosting with exact greedy splits.
WeakLearnerEnsemble fit_gbrt(const Matrix& data, const Vector& labels, const GbrtConfig& cfg);

Vector feature_map(const WeakLearnerEnsemble& ensemble, const Eigen::Ref<const Vector>& x);
const Matrix& usage_matrix(const WeakLearnerEnsemble& ensemble);

}  // namespace cstc
