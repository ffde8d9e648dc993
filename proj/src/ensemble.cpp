#include "cstc/ensemble.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "cstc/error.hpp"

namespace cstc {

double RegressionTree::evaluate(const Eigen::Ref<const Vector>& x) const {
    int at = 0;
    while (!nodes[at].is_leaf()) {
        const Node& n = nodes[at];
        at = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[at].value;
}

int RegressionTree::depth() const {
    // depth counts split levels; a single leaf has depth 0
    std::vector<int> level(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].is_leaf()) continue;
        for (int c : {nodes[i].left, nodes[i].right}) {
            level[c] = level[i] + 1;
            deepest = std::max(deepest, level[c]);
        }
    }
    return deepest;
}

std::vector<int> RegressionTree::used_features() const {
    std::vector<int> out;
    for (const Node& n : nodes)
        if (!n.is_leaf()) out.push_back(n.feature);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

WeakLearnerEnsemble WeakLearnerEnsemble::identity(int num_features) {
    if (num_features < 1) throw InvalidInput("identity ensemble needs at least one feature");
    WeakLearnerEnsemble e;
    e.mode_ = Mode::identity;
    e.num_features_ = num_features;
    e.num_learners_ = num_features;
    e.eval_costs_ = Vector::Zero(num_features);
    e.usage_ = Matrix::Identity(num_features, num_features);
    return e;
}

WeakLearnerEnsemble WeakLearnerEnsemble::from_trees(int num_features, std::vector<RegressionTree> trees,
                                                    Vector eval_costs) {
    if (num_features < 1) throw InvalidInput("ensemble needs at least one feature");
    if (trees.empty()) throw InvalidInput("ensemble needs at least one weak learner");
    if (eval_costs.size() != static_cast<Eigen::Index>(trees.size()))
        throw InvalidInput("evaluation cost vector length does not match the number of weak learners");
    for (const RegressionTree& t : trees) {
        if (t.nodes.empty()) throw InvalidInput("weak learner without nodes");
        for (const auto& n : t.nodes) {
            if (n.is_leaf()) continue;
            if (n.feature >= num_features) throw InvalidInput("weak learner splits on unknown feature");
            const auto size = static_cast<int>(t.nodes.size());
            if (n.left < 0 || n.left >= size || n.right < 0 || n.right >= size)
                throw InvalidInput("weak learner has a dangling child index");
        }
    }
    WeakLearnerEnsemble e;
    e.mode_ = Mode::boosted;
    e.num_features_ = num_features;
    e.num_learners_ = static_cast<int>(trees.size());
    e.trees_ = std::move(trees);
    e.set_eval_costs(std::move(eval_costs));
    e.rebuild_usage();
    return e;
}

void WeakLearnerEnsemble::set_eval_costs(Vector costs) {
    if (costs.size() != num_learners_)
        throw InvalidInput("evaluation cost vector length does not match the number of weak learners");
    if ((costs.array() < 0.0).any() || !costs.allFinite())
        throw InvalidInput("evaluation costs must be finite and non-negative");
    eval_costs_ = std::move(costs);
}

void WeakLearnerEnsemble::rebuild_usage() {
    usage_ = Matrix::Zero(num_features_, num_learners_);
    for (int t = 0; t < num_learners_; ++t)
        for (int f : trees_[t].used_features()) usage_(f, t) = 1.0;
}

Vector WeakLearnerEnsemble::feature_map(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != num_features_)
        throw InvalidInput("feature_map: expected " + std::to_string(num_features_) + " components, got " +
                           std::to_string(x.size()));
    if (mode_ == Mode::identity) return x;
    Vector out(num_learners_);
    for (int t = 0; t < num_learners_; ++t) out[t] = trees_[t].evaluate(x);
    return out;
}

Matrix WeakLearnerEnsemble::transform(const Matrix& data) const {
    if (data.cols() != num_features_)
        throw InvalidInput("transform: expected " + std::to_string(num_features_) + " columns, got " +
                           std::to_string(data.cols()));
    if (mode_ == Mode::identity) return data;
    Matrix out(data.rows(), num_learners_);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const Vector row = data.row(i).transpose();
        for (int t = 0; t < num_learners_; ++t) out(i, t) = trees_[t].evaluate(row);
    }
    return out;
}

double WeakLearnerEnsemble::predict(const Eigen::Ref<const Vector>& x) const {
    return feature_map(x).sum();
}

namespace {

/// Grows one least-squares tree on residuals. Every node keeps, per feature,
/// its member rows sorted by that feature's value, so each level costs O(n d).
class TreeGrower {
public:
    TreeGrower(const Matrix& data, const Vector& residual, const GbrtConfig& cfg)
        : data_(data), residual_(residual), cfg_(cfg), side_(data.rows(), 0) {}

    RegressionTree grow(std::vector<std::vector<int>> sorted, double leaf_scale, double leaf_offset) {
        scale_ = leaf_scale;
        offset_ = leaf_offset;
        tree_.nodes.clear();
        build(std::move(sorted), 0);
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    int build(std::vector<std::vector<int>> sorted, int depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const std::vector<int>& rows = sorted.front();
        const auto count = static_cast<double>(rows.size());
        double sum = 0.0;
        for (int r : rows) sum += residual_[r];

        Split best;
        if (depth < cfg_.max_depth && rows.size() >= 2 * static_cast<std::size_t>(cfg_.min_samples_leaf))
            best = find_split(sorted, sum);

        if (best.feature < 0) {
            tree_.nodes[id].value = offset_ + scale_ * (sum / count);
            return id;
        }

        for (int r : rows) side_[r] = data_(r, best.feature) <= best.threshold ? 0 : 1;
        std::vector<std::vector<int>> left(sorted.size()), right(sorted.size());
        for (std::size_t f = 0; f < sorted.size(); ++f) {
            for (int r : sorted[f]) (side_[r] == 0 ? left[f] : right[f]).push_back(r);
            std::vector<int>().swap(sorted[f]);
        }
        const int l = build(std::move(left), depth + 1);
        const int r = build(std::move(right), depth + 1);
        auto& node = tree_.nodes[id];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    // Ties resolve to the lowest feature index, then the lowest threshold,
    // because only a strictly larger gain replaces the incumbent.
    Split find_split(const std::vector<std::vector<int>>& sorted, double sum) const {
        Split best;
        const std::size_t n = sorted.front().size();
        const double parent = sum * sum / static_cast<double>(n);
        const auto min_leaf = static_cast<std::size_t>(cfg_.min_samples_leaf);
        for (std::size_t f = 0; f < sorted.size(); ++f) {
            const std::vector<int>& order = sorted[f];
            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += residual_[order[i]];
                const std::size_t nl = i + 1, nr = n - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double a = data_(order[i], static_cast<Eigen::Index>(f));
                const double b = data_(order[i + 1], static_cast<Eigen::Index>(f));
                if (!(a < b)) continue;
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(nl) +
                                    right_sum * right_sum / static_cast<double>(nr) - parent;
                if (gain > best.gain + 1e-12 * std::max(1.0, best.gain)) {
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (a + b);
                    best.gain = gain;
                }
            }
        }
        return best;
    }

    const Matrix& data_;
    const Vector& residual_;
    const GbrtConfig& cfg_;
    std::vector<char> side_;
    RegressionTree tree_;
    double scale_ = 1.0;
    double offset_ = 0.0;
};

}  // namespace

WeakLearnerEnsemble fit_gbrt(const Matrix& data, const Vector& labels, const GbrtConfig& cfg) {
    if (data.rows() < 1 || data.cols() < 1) throw InvalidInput("fit_gbrt: empty dataset");
    if (labels.size() != data.rows()) throw InvalidInput("fit_gbrt: label count does not match rows");
    if (cfg.rounds < 1) throw InvalidInput("fit_gbrt: rounds must be >= 1");
    if (cfg.max_depth < 1) throw InvalidInput("fit_gbrt: max_depth must be >= 1");
    if (!(cfg.shrinkage > 0.0 && cfg.shrinkage <= 1.0)) throw InvalidInput("fit_gbrt: shrinkage must lie in (0, 1]");
    if (cfg.min_samples_leaf < 1) throw InvalidInput("fit_gbrt: min_samples_leaf must be >= 1");
    if (!data.allFinite() || !labels.allFinite()) throw InvalidInput("fit_gbrt: non-finite input");

    const auto n = static_cast<int>(data.rows());
    const auto d = static_cast<int>(data.cols());

    std::vector<std::vector<int>> sorted(d, std::vector<int>(n));
    for (int f = 0; f < d; ++f) {
        std::iota(sorted[f].begin(), sorted[f].end(), 0);
        std::stable_sort(sorted[f].begin(), sorted[f].end(),
                         [&](int a, int b) { return data(a, f) < data(b, f); });
    }

    const double base = labels.mean();
    Vector prediction = Vector::Constant(n, base);
    Vector residual(n);
    std::vector<RegressionTree> trees;
    trees.reserve(cfg.rounds);
    for (int t = 0; t < cfg.rounds; ++t) {
        residual = labels - prediction;
        TreeGrower grower(data, residual, cfg);
        RegressionTree tree = grower.grow(sorted, cfg.shrinkage, t == 0 ? base : 0.0);
        for (int i = 0; i < n; ++i) {
            double v = tree.evaluate(data.row(i).transpose());
            prediction[i] += t == 0 ? v - base : v;
        }
        trees.push_back(std::move(tree));
    }
    return WeakLearnerEnsemble::from_trees(d, std::move(trees), Vector::Ones(cfg.rounds));
}

Vector feature_map(const WeakLearnerEnsemble& ensemble, const Eigen::Ref<const Vector>& x) {
    return ensemble.feature_map(x);
}

const Matrix& usage_matrix(const WeakLearnerEnsemble& ensemble) { return ensemble.usage(); }

}  // namespace cstc
