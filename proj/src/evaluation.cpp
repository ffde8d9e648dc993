#include "cstc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cstc/error.hpp"

namespace cstc {

double mean_squared_error(const Vector& predictions, const Vector& labels) {
    if (predictions.size() != labels.size()) throw InvalidInput("mean_squared_error: length mismatch");
    if (predictions.size() == 0) throw InvalidInput("mean_squared_error: empty input");
    return (predictions - labels).squaredNorm() / static_cast<double>(labels.size());
}

double ndcg_at_k(const Vector& predictions, const Vector& labels,
                 const std::vector<std::vector<Eigen::Index>>& groups, int k) {
    if (k < 1) throw InvalidInput("ndcg_at_k: k must be >= 1");
    if (predictions.size() != labels.size()) throw InvalidInput("ndcg_at_k: length mismatch");
    std::vector<std::vector<Eigen::Index>> all;
    const auto* qs = &groups;
    if (groups.empty()) {
        all.emplace_back(labels.size());
        std::iota(all.back().begin(), all.back().end(), Eigen::Index{0});
        qs = &all;
    }
    if (qs->empty()) throw InvalidInput("ndcg_at_k: no queries");

    auto dcg = [k](const std::vector<double>& ranked) {
        double s = 0.0;
        const std::size_t top = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
        for (std::size_t r = 0; r < top; ++r) s += (std::exp2(ranked[r]) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
        return s;
    };

    double total = 0.0;
    for (const auto& q : *qs) {
        if (q.empty()) throw InvalidInput("ndcg_at_k: empty query group");
        std::vector<Eigen::Index> order = q;
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return predictions[a] > predictions[b]; });
        std::vector<double> achieved, ideal;
        for (auto i : order) achieved.push_back(labels[i]);
        for (auto i : q) ideal.push_back(labels[i]);
        std::sort(ideal.begin(), ideal.end(), std::greater<>());
        const double best = dcg(ideal);
        total += best > 0.0 ? dcg(achieved) / best : 1.0;
    }
    return total / static_cast<double>(qs->size());
}

CostReport evaluate_cost(const CstcTree& tree, const WeakLearnerEnsemble& ensemble, const CostSchedule& schedule,
                         const Matrix& data) {
    const Matrix& usage = ensemble.usage();
    schedule.validate(ensemble.num_features(), ensemble.num_learners());
    if (tree.num_learners() != ensemble.num_learners()) throw InvalidInput("evaluate_cost: tree and ensemble disagree on T");
    const Matrix phi = ensemble.transform(data);
    const int T = ensemble.num_learners();

    CostReport report;
    report.per_instance.reserve(static_cast<std::size_t>(data.rows()));
    std::vector<char> computed(T), extracted(usage.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        std::fill(computed.begin(), computed.end(), 0);
        std::fill(extracted.begin(), extracted.end(), 0);
        InstanceCost cost;
        auto run = [&](const Vector& w) {
            for (int t = 0; t < T; ++t) {
                if (!is_active(w[t]) || computed[t]) continue;
                computed[t] = 1;
                cost.evaluation_cost += schedule.learner_costs[t];
                for (Eigen::Index a = 0; a < usage.rows(); ++a) {
                    if (usage(a, t) == 0.0 || extracted[a]) continue;
                    extracted[a] = 1;
                    cost.extraction_cost += schedule.feature_costs[a];
                }
            }
        };
        const Vector row = phi.row(i).transpose();
        int k = 0;
        for (;;) {
            const ClassifierNode& node = tree.node(k);
            // a node whose children are both terminals never needs to route
            if (!(node.upper.is_terminal() && node.lower.is_terminal())) run(node.beta);
            const ChildRef& next = row.dot(node.beta) > node.theta ? node.upper : node.lower;
            if (next.is_terminal()) {
                run(node.prediction_weights());
                cost.terminal = next.index;
                break;
            }
            k = next.index;
        }
        cost.total = cost.evaluation_cost + cost.extraction_cost;
        report.mean_total += cost.total;
        report.per_instance.push_back(cost);
    }
    if (!report.per_instance.empty()) report.mean_total /= static_cast<double>(report.per_instance.size());
    report.per_depth_feature_fractions = depth_feature_fractions(tree, schedule, usage);
    return report;
}

std::vector<char> node_features(const CstcTree& tree, int k, const Matrix& usage) {
    std::vector<char> out(usage.rows(), 0);
    const ClassifierNode& node = tree.node(k);
    std::vector<const Vector*> weights{&node.prediction_weights()};
    if (node.tuned_beta) weights.push_back(&node.beta);
    for (const Vector* w : weights)
        for (int t = 0; t < tree.num_learners(); ++t)
            if (is_active((*w)[t]))
                for (Eigen::Index a = 0; a < usage.rows(); ++a)
                    if (usage(a, t) != 0.0) out[a] = 1;
    return out;
}

std::vector<char> cumulative_features(const CstcTree& tree, int k, const Matrix& usage) {
    std::vector<char> out(usage.rows(), 0);
    for (int j : tree.ancestry(k)) {
        const auto own = node_features(tree, j, usage);
        for (std::size_t a = 0; a < own.size(); ++a) out[a] = out[a] || own[a];
    }
    return out;
}

std::vector<DepthFractions> depth_feature_fractions(const CstcTree& tree, const CostSchedule& schedule,
                                                    const Matrix& usage) {
    static const std::vector<double> kLevels{1, 5, 20, 50, 100, 150, 200};
    const Vector& c = schedule.feature_costs;
    const bool on_levels = std::all_of(c.data(), c.data() + c.size(), [](double v) {
        return std::find(kLevels.begin(), kLevels.end(), v) != kLevels.end();
    });

    std::vector<double> edges;
    if (on_levels) {
        std::set<double> present(c.data(), c.data() + c.size());
        edges.assign(present.begin(), present.end());
    } else {
        std::vector<double> sorted(c.data(), c.data() + c.size());
        std::sort(sorted.begin(), sorted.end());
        for (int q = 1; q <= 10; ++q) {
            const auto idx = static_cast<std::size_t>(std::ceil(q * sorted.size() / 10.0)) - 1;
            edges.push_back(sorted[std::min(idx, sorted.size() - 1)]);
        }
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    }
    auto group_of = [&](double cost) {
        return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), cost) - edges.begin());
    };

    const int depth = tree.depth();
    std::vector<std::vector<char>> extracted(depth, std::vector<char>(usage.rows(), 0));
    for (int k = 0; k < tree.num_nodes(); ++k) {
        const auto feats = cumulative_features(tree, k, usage);
        auto& at = extracted[tree.node(k).depth - 1];
        for (std::size_t a = 0; a < feats.size(); ++a) at[a] = at[a] || feats[a];
    }

    std::vector<DepthFractions> out(edges.size());
    for (std::size_t g = 0; g < edges.size(); ++g) {
        out[g].cost_group = edges[g];
        out[g].by_depth.assign(depth, 0.0);
    }
    for (Eigen::Index a = 0; a < c.size(); ++a) {
        auto& row = out[group_of(c[a])];
        ++row.num_features;
        for (int d = 0; d < depth; ++d) row.by_depth[d] += extracted[d][a];
    }
    for (auto& row : out)
        for (double& f : row.by_depth) f = row.num_features > 0 ? f / row.num_features : 0.0;
    return out;
}

double jaccard(const std::vector<char>& a, const std::vector<char>& b) {
    if (a.size() != b.size()) throw InvalidInput("jaccard: set universes differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += a[i] && b[i];
        uni += a[i] || b[i];
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

JaccardMatrix jaccard_matrix(const CstcTree& tree, const Matrix& usage) {
    JaccardMatrix out;
    out.nodes = tree.predictive_nodes();
    std::vector<std::vector<char>> sets;
    for (int k : out.nodes) sets.push_back(cumulative_features(tree, k, usage));
    const auto m = static_cast<Eigen::Index>(sets.size());
    out.values.resize(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = a; b < m; ++b) out.values(a, b) = out.values(b, a) = jaccard(sets[a], sets[b]);
    return out;
}

Vector node_label_means(const CstcTree& tree, const Matrix& phi, const Vector& labels) {
    Vector sum = Vector::Zero(tree.num_nodes());
    Vector count = Vector::Zero(tree.num_nodes());
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
        for (int k : hard_route(tree, phi.row(i).transpose()).path) {
            sum[k] += labels[i];
            count[k] += 1.0;
        }
    }
    Vector out(tree.num_nodes());
    for (int k = 0; k < tree.num_nodes(); ++k) out[k] = count[k] > 0 ? sum[k] / count[k] : std::nan("");
    return out;
}

}  // namespace cstc
