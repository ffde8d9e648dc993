#include "cstc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "cstc/error.hpp"

namespace cstc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double population_variance(const Vector& v) {
    return (v.array() - v.mean()).square().mean();
}

}  // namespace

Bundle make_bundle(Dataset data, const WeakLearnerEnsemble& ensemble) {
    Bundle b;
    b.phi = ensemble.transform(data.features);
    b.groups = query_groups(data);
    b.data = std::move(data);
    return b;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double holdout, std::uint64_t seed) {
    if (!(holdout > 0.0 && holdout < 1.0)) throw InvalidInput("holdout fraction must lie in (0, 1)");
    // units are whole queries, or single rows when there are no query ids
    std::vector<std::vector<Eigen::Index>> units = data.has_queries() ? query_groups(data)
                                                                       : std::vector<std::vector<Eigen::Index>>{};
    if (!data.has_queries())
        for (Eigen::Index i = 0; i < data.size(); ++i) units.push_back({i});
    const auto held = static_cast<std::size_t>(std::llround(holdout * static_cast<double>(units.size())));
    if (held == 0 || held >= units.size()) throw InvalidInput("holdout fraction leaves one side of the split empty");

    std::vector<std::size_t> order(units.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_stream(seed, 2);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> in_holdout(units.size(), 0);
    for (std::size_t j = 0; j < held; ++j) in_holdout[order[j]] = 1;

    std::vector<Eigen::Index> keep, out;
    for (std::size_t u = 0; u < units.size(); ++u)
        for (auto i : units[u]) (in_holdout[u] ? out : keep).push_back(i);
    return {data.subset(keep), data.subset(out)};
}

void PipelineConfig::validate() const {
    if (depth < 1) throw InvalidInput("tree depth must be >= 1");
    if (max_nodes < 0) throw InvalidInput("node cap must be >= 0");
    if (!(prune_tolerance >= 0.0)) throw InvalidInput("prune tolerance must be >= 0");
    if (!(fine_tune_rho >= 0.0)) throw InvalidInput("fine-tuning rho must be >= 0");
    loss.validate();
    opt.validate();
    metric.validate();
}

CstcTree PipelineConfig::shape(int num_learners) const {
    return max_nodes > 0 ? CstcTree::capped(depth, max_nodes, num_learners) : CstcTree::full(depth, num_learners);
}

FitResult fit_cstc(const Bundle& train, const Bundle* valid, const CostSchedule& schedule, const Matrix& usage,
                   const PipelineConfig& cfg) {
    cfg.validate();
    const int T = static_cast<int>(train.phi.cols());
    const LossContext ctx{train.phi, train.data.labels, usage, schedule, cfg.loss};
    FitResult out{cstc::train(cfg.shape(T), ctx, cfg.opt), std::nullopt, std::nullopt, CstcTree::full(1, T)};
    out.model = out.training.tree;
    if (cfg.prune && valid) {
        out.pruned = prune(out.model, valid->eval(), cfg.metric, cfg.prune_tolerance);
        out.model = out.pruned->tree;
    }
    if (cfg.fine_tune) {
        FineTuneConfig ft{cfg.fine_tune_rho, cfg.loss.epsilon_aux, cfg.opt};
        const EvalSet held = valid ? valid->eval() : EvalSet{};
        out.tuned = fine_tune(out.model, train.phi, train.data.labels, valid ? &held : nullptr, cfg.metric, ft);
        out.model = out.tuned->tree;
    }
    return out;
}

double max_loss_increase(const TrainResult& result) {
    double worst = 0.0;
    auto scan = [&worst](const std::vector<double>& trace) {
        for (std::size_t i = 1; i < trace.size(); ++i) worst = std::max(worst, trace[i] - trace[i - 1]);
    };
    for (const auto& entry : result.log) scan(entry.update.trace);
    scan(result.sweep_trace);
    return worst;
}

ModelMetrics measure(const CstcTree& tree, const WeakLearnerEnsemble& ensemble, const CostSchedule& schedule,
                     const Bundle& set, int k) {
    ModelMetrics m;
    const Vector predictions = predict_all(tree, set.phi);
    m.mse = mean_squared_error(predictions, set.data.labels);
    m.ndcg = ndcg_at_k(predictions, set.data.labels, set.groups, k);
    m.mean_cost = evaluate_cost(tree, ensemble, schedule, set.data.features).mean_total;
    m.nodes = tree.num_nodes();
    return m;
}

std::vector<SweepRow> sweep(const std::vector<double>& lambdas, const WeakLearnerEnsemble& ensemble,
                            const CostSchedule& schedule, const Bundle& train, const Bundle* valid, const Bundle& test,
                            const PipelineConfig& cfg) {
    if (lambdas.empty()) throw InvalidInput("sweep needs at least one lambda");
    std::vector<SweepRow> rows;
    for (double lambda : lambdas) {
        SweepRow row;
        row.lambda = lambda;
        const auto start = Clock::now();
        try {
            PipelineConfig c = cfg;
            c.loss.lambda = lambda;
            FitResult fit = fit_cstc(train, valid, schedule, ensemble.usage(), c);
            row.max_loss_increase = max_loss_increase(fit.training);
            if (valid) row.validation = measure(fit.model, ensemble, schedule, *valid, cfg.metric.k);
            row.test = measure(fit.model, ensemble, schedule, test, cfg.metric.k);
            row.test_metric = cfg.metric.kind == ValidationMetric::Kind::mse ? row.test.mse : row.test.ndcg;
            row.model = std::move(fit.model);
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        row.seconds = seconds_since(start);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "lambda,ok,mean_cost,metric,mse,ndcg5,nodes,error\n";
    for (const auto& r : rows) {
        std::string error = r.error;
        std::replace(error.begin(), error.end(), ',', ';');
        std::replace(error.begin(), error.end(), '\n', ' ');
        os << r.lambda << ',' << (r.ok ? 1 : 0) << ',' << r.test.mean_cost << ',' << r.test_metric << ','
           << r.test.mse << ',' << r.test.ndcg << ',' << r.test.nodes << ',' << error << '\n';
    }
    return os.str();
}

SyntheticStructure synthetic_structure(const CstcTree& tree, const SyntheticData& set) {
    const Matrix usage = Matrix::Identity(6, 6);
    SyntheticStructure s;
    s.paths_ok = true;
    for (int l = 0; l < tree.num_terminals(); ++l) {
        auto f = cumulative_features(tree, tree.terminal(l).parent, usage);
        const int expensive = f[2] + f[3] + f[4] + f[5];
        if (!(f[0] && f[1] && expensive == 1)) s.paths_ok = false;
        s.path_features.push_back(std::move(f));
    }
    const Matrix& x = set.data.features;
    long matched = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Route r = hard_route(tree, x.row(i).transpose());
        const auto& f = s.path_features[static_cast<std::size_t>(r.terminal)];
        const int q = set.quadrant[static_cast<std::size_t>(i)];
        const int expensive = f[2] + f[3] + f[4] + f[5];
        if (expensive == 1 && f[2 + q]) ++matched;
    }
    s.routing_accuracy = x.rows() > 0 ? static_cast<double>(matched) / static_cast<double>(x.rows()) : 0.0;
    return s;
}

SyntheticOutcome run_synthetic(const SyntheticExperimentConfig& cfg) {
    if (cfg.valid_n < 1 || cfg.test_n < 1) throw InvalidInput("synthetic validation and test sizes must be >= 1");
    if (cfg.lambdas.empty()) throw InvalidInput("synthetic experiment needs at least one lambda");
    const auto start = Clock::now();

    auto draw = [&cfg](int n, std::uint64_t stream) {
        SyntheticConfig c = cfg.data;
        c.n = n;
        c.seed = make_stream(cfg.data.seed, stream)();
        return generate_synthetic(c);
    };
    const SyntheticData train_set = draw(cfg.data.n, 10);
    const SyntheticData valid_set = draw(cfg.valid_n, 11);
    const SyntheticData test_set = draw(cfg.test_n, 12);
    const auto ensemble = WeakLearnerEnsemble::identity(6);
    const CostSchedule& schedule = train_set.schedule;
    const Bundle train = make_bundle(train_set.data, ensemble);
    const Bundle valid = make_bundle(valid_set.data, ensemble);
    const Bundle test = make_bundle(test_set.data, ensemble);

    PipelineConfig pc;
    pc.depth = cfg.depth;
    pc.loss.rho = cfg.rho;
    pc.opt = cfg.opt;
    pc.metric.kind = ValidationMetric::Kind::mse;

    SyntheticOutcome out;
    out.grid = sweep(cfg.lambdas, ensemble, schedule, train, &valid, test, pc);

    const double target = 0.1 * population_variance(train.data.labels);
    const SweepRow* chosen = nullptr;
    for (const auto& r : out.grid) {
        if (!r.ok || !(r.validation.mse < target)) continue;
        if (!chosen || r.validation.mean_cost < chosen->validation.mean_cost ||
            (r.validation.mean_cost == chosen->validation.mean_cost && r.validation.mse < chosen->validation.mse))
            chosen = &r;
    }
    if (!chosen)
        for (const auto& r : out.grid)
            if (r.ok && (!chosen || r.validation.mse < chosen->validation.mse)) chosen = &r;
    if (!chosen) throw NumericalError("synthetic experiment: every lambda failed (" + out.grid.front().error + ")");

    out.chosen_lambda = chosen->lambda;
    out.model = *chosen->model;
    out.test_mse = chosen->test.mse;
    out.mean_cost = chosen->test.mean_cost;
    out.label_variance = population_variance(test.data.labels);
    out.structure = synthetic_structure(out.model, test_set);
    out.seconds = seconds_since(start);
    return out;
}

RankingOutcome run_ranking(const RankingExperimentConfig& cfg) {
    if (cfg.lambdas.empty()) throw InvalidInput("ranking experiment needs at least one lambda");
    const RankingData generated = generate_ranking_surrogate(cfg.data);
    auto [rest, test_data] = split_dataset(generated.data, cfg.test_fraction, cfg.data.seed);
    auto [train_data, valid_data] =
        split_dataset(rest, cfg.valid_fraction / (1.0 - cfg.test_fraction), make_stream(cfg.data.seed, 3)());

    const WeakLearnerEnsemble ensemble = fit_gbrt(train_data.features, train_data.labels, cfg.gbrt);
    const CostSchedule schedule{generated.feature_costs, ensemble.eval_costs(), "weak-learner evaluations"};
    const Bundle train = make_bundle(std::move(train_data), ensemble);
    const Bundle valid = make_bundle(std::move(valid_data), ensemble);
    const Bundle test = make_bundle(std::move(test_data), ensemble);

    RankingOutcome out;
    Vector full(test.phi.rows());
    for (Eigen::Index i = 0; i < test.phi.rows(); ++i) full[i] = test.phi.row(i).sum();
    out.ensemble_ndcg = ndcg_at_k(full, test.data.labels, test.groups, 5);

    PipelineConfig pc;
    pc.depth = cfg.depth;
    pc.max_nodes = cfg.max_nodes;
    pc.opt = cfg.opt;
    pc.metric.kind = ValidationMetric::Kind::ndcg_at_k;
    pc.metric.k = 5;
    out.tree = sweep(cfg.lambdas, ensemble, schedule, train, &valid, test, pc);

    PipelineConfig single = pc;
    single.depth = 1;
    single.max_nodes = 0;
    out.single = sweep(cfg.lambdas, ensemble, schedule, train, &valid, test, single);

    for (const auto& r : out.tree)
        if (r.ok && r.lambda == 0.0) out.lambda0_cost = r.test.mean_cost;
    return out;
}

std::string tree_to_dot(const CstcTree& tree, const Matrix& usage, const std::vector<std::string>& feature_names,
                        const Vector* node_means) {
    auto name = [&](Eigen::Index a) {
        return a < static_cast<Eigen::Index>(feature_names.size()) ? feature_names[a] : "f" + std::to_string(a);
    };
    std::ostringstream os;
    os << std::setprecision(4);
    os << "digraph cstc {\n  rankdir=TB;\n  node [fontname=\"Helvetica\"];\n";
    for (int k = 0; k < tree.num_nodes(); ++k) {
        const ClassifierNode& n = tree.node(k);
        const auto own = cumulative_features(tree, k, usage);
        const auto inherited = n.parent >= 0 ? cumulative_features(tree, n.parent, usage) : std::vector<char>(own.size(), 0);
        std::string added;
        for (std::size_t a = 0; a < own.size(); ++a)
            if (own[a] && !inherited[a]) added += (added.empty() ? "" : ",") + name(static_cast<Eigen::Index>(a));
        os << "  v" << k << " [shape=circle,label=\"v" << k;
        if (!(n.upper.is_terminal() && n.lower.is_terminal())) os << "\\ntheta=" << n.theta;
        os << "\\n+{" << added << "}";
        if (node_means && k < node_means->size() && std::isfinite((*node_means)[k]))
            os << "\\nmean=" << (*node_means)[k];
        os << "\"];\n";
    }
    for (int l = 0; l < tree.num_terminals(); ++l)
        os << "  t" << l << " [shape=square,style=filled,fillcolor=black,label=\"\",width=0.2];\n";
    for (int k = 0; k < tree.num_nodes(); ++k) {
        const ClassifierNode& n = tree.node(k);
        for (const auto& [child, tag] : {std::pair{n.upper, "upper"}, std::pair{n.lower, "lower"}})
            os << "  v" << k << " -> " << (child.is_terminal() ? "t" : "v") << child.index << " [label=\"" << tag
               << "\"];\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace cstc
