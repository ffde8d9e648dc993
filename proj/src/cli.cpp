#include "cstc/cli.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cstc/error.hpp"
#include "cstc/pipeline.hpp"
#include "cstc/serialization.hpp"

namespace cstc {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<double> kDefaultLambdas{1.0 / 3.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0};

struct Options {
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    bool emit_dot = false;

    std::string train_path, valid_path, test_path, data_path;
    std::string ensemble_path, model_path, costs_path;
    double valid_ratio = 0.0;

    // synthetic and surrogate generators
    int n = 4000, valid_n = 1000, test_n = 1000;
    std::vector<double> lambdas;
    int queries = 200, docs = 20, features = 60;
    bool experiment = false;

    GbrtConfig gbrt;
    GbrtConfig rank_gbrt{50, 3, 0.1, 1};
    bool identity = false;

    int depth = 3, max_nodes = 0;
    double lambda = 1.0, rho = 0.0, epsilon_aux = 1e-8;
    OptimizerConfig opt;
    std::string metric = "mse";
    int ndcg_k = 5;
    double prune_tolerance = 0.0;
    bool no_prune = false, no_fine_tune = false;
    bool per_instance = false;
};

json resolved_config(const CLI::App& sub) {
    json options = json::object();
    for (const CLI::Option* o : sub.get_options()) {
        const auto& names = o->get_lnames();
        if (names.empty() || names.front() == "help") continue;
        const auto& results = o->results();
        if (o->count() > 0)
            options[names.front()] = results.size() == 1 ? json(results.front()) : json(results);
        else
            options[names.front()] = o->get_default_str();
    }
    return {{"command", sub.get_name()}, {"options", options}};
}

fs::path prepare_out_dir(const Options& o, const CLI::App& sub) {
    const fs::path dir(o.out_dir);
    fs::create_directories(dir);
    write_text((dir / "config.json").string(), resolved_config(sub).dump(2) + "\n");
    return dir;
}

ValidationMetric metric_of(const Options& o) {
    ValidationMetric m;
    m.kind = o.metric == "ndcg" ? ValidationMetric::Kind::ndcg_at_k : ValidationMetric::Kind::mse;
    m.k = o.ndcg_k;
    return m;
}

PipelineConfig pipeline_of(const Options& o) {
    PipelineConfig pc;
    pc.depth = o.depth;
    pc.max_nodes = o.max_nodes;
    pc.loss = LossConfig{o.lambda, o.rho, o.epsilon_aux};
    pc.opt = o.opt;
    pc.prune = !o.no_prune;
    pc.prune_tolerance = o.prune_tolerance;
    pc.fine_tune = !o.no_fine_tune;
    pc.fine_tune_rho = o.rho;
    pc.metric = metric_of(o);
    return pc;
}

CostSchedule schedule_of(const Options& o, const WeakLearnerEnsemble& ensemble) {
    return load_costs(o.costs_path, ensemble.num_features(), ensemble.eval_costs());
}

Dataset load_for(const std::string& path, const WeakLearnerEnsemble& ensemble) {
    return load_dataset(path, ensemble.num_features());
}

/// Validation data from a file, or carved out of the training data.
std::optional<Dataset> validation_split(const Options& o, Dataset& train) {
    if (!o.valid_path.empty()) return load_dataset(o.valid_path, train.num_features());
    if (o.valid_ratio > 0.0) {
        auto [keep, held] = split_dataset(train, o.valid_ratio, o.seed);
        train = std::move(keep);
        return std::move(held);
    }
    return std::nullopt;
}

json tree_summary(const CstcTree& tree, const Matrix& usage) {
    json nodes = json::array();
    for (int k = 0; k < tree.num_nodes(); ++k) {
        const auto f = node_features(tree, k, usage);
        std::vector<int> used;
        for (std::size_t a = 0; a < f.size(); ++a)
            if (f[a]) used.push_back(static_cast<int>(a));
        nodes.push_back({{"node", k}, {"theta", tree.node(k).theta}, {"features", used}});
    }
    return nodes;
}

void emit(std::ostream& out, const json& j) { out << j.dump() << "\n"; }

// --- subcommands -----------------------------------------------------------

void cmd_synth(const Options& o, const CLI::App& sub, std::ostream& out) {
    const fs::path dir = prepare_out_dir(o, sub);
    SyntheticExperimentConfig cfg;
    cfg.data.n = o.n;
    cfg.data.seed = o.seed;
    cfg.valid_n = o.valid_n;
    cfg.test_n = o.test_n;
    cfg.depth = o.depth;
    if (!o.lambdas.empty()) cfg.lambdas = o.lambdas;
    cfg.rho = o.rho;
    cfg.opt = o.opt;
    const SyntheticOutcome r = run_synthetic(cfg);

    const auto ensemble = WeakLearnerEnsemble::identity(6);
    json paths = json::array();
    for (const auto& f : r.structure.path_features) {
        std::vector<int> used;
        for (std::size_t a = 0; a < f.size(); ++a)
            if (f[a]) used.push_back(static_cast<int>(a));
        paths.push_back(used);
    }
    const json metrics = {{"chosen_lambda", r.chosen_lambda},
                          {"test_mse", r.test_mse},
                          {"test_label_variance", r.label_variance},
                          {"mean_cost", r.mean_cost},
                          {"paths_ok", r.structure.paths_ok},
                          {"routing_accuracy", r.structure.routing_accuracy},
                          {"path_features", paths},
                          {"nodes", tree_summary(r.model, ensemble.usage())}};
    write_text((dir / "metrics.json").string(), metrics.dump(2) + "\n");
    write_text((dir / "grid.csv").string(), sweep_csv(r.grid));
    save_ensemble((dir / "ensemble.json").string(), ensemble);
    save_model((dir / "model.json").string(), r.model, ensemble);
    if (o.emit_dot) {
        const std::vector<std::string> names{"sign_x", "sign_z", "y_pp", "y_pm", "y_mp", "y_mm"};
        write_text((dir / "tree.dot").string(), tree_to_dot(r.model, ensemble.usage(), names));
    }
    emit(out, {{"command", "synth"},
               {"chosen_lambda", r.chosen_lambda},
               {"test_mse", r.test_mse},
               {"mean_cost", r.mean_cost},
               {"seconds", r.seconds}});
}

void cmd_rank_surrogate(const Options& o, const CLI::App& sub, std::ostream& out) {
    const fs::path dir = prepare_out_dir(o, sub);
    RankingConfig rc;
    rc.queries = o.queries;
    rc.docs_per_query = o.docs;
    rc.num_features = o.features;
    rc.seed = o.seed;
    const RankingData data = generate_ranking_surrogate(rc);
    save_dataset_csv((dir / "data.csv").string(), data.data);
    save_costs((dir / "costs.txt").string(), data.feature_costs);
    json summary = {{"command", "rank-surrogate"}, {"rows", data.data.size()}, {"features", rc.num_features}};
    if (o.experiment) {
        RankingExperimentConfig cfg;
        cfg.data = rc;
        cfg.gbrt = o.rank_gbrt;
        cfg.depth = o.depth;
        cfg.max_nodes = o.max_nodes;
        if (!o.lambdas.empty()) cfg.lambdas = o.lambdas;
        cfg.opt = o.opt;
        const RankingOutcome r = run_ranking(cfg);
        write_text((dir / "tree_curve.csv").string(), sweep_csv(r.tree));
        write_text((dir / "single_curve.csv").string(), sweep_csv(r.single));
        summary["ensemble_ndcg"] = r.ensemble_ndcg;
        summary["lambda0_cost"] = r.lambda0_cost;
    }
    emit(out, summary);
}

void cmd_fit_ensemble(const Options& o, const CLI::App& sub, std::ostream& out) {
    const Dataset train = load_dataset(o.train_path);
    const fs::path dir = prepare_out_dir(o, sub);
    const WeakLearnerEnsemble ensemble = o.identity ? WeakLearnerEnsemble::identity(train.num_features())
                                                    : fit_gbrt(train.features, train.labels, o.gbrt);
    save_ensemble((dir / "ensemble.json").string(), ensemble);
    emit(out, {{"command", "fit-ensemble"},
               {"learners", ensemble.num_learners()},
               {"sha256", ensemble_hash(ensemble)}});
}

void cmd_train(const Options& o, const CLI::App& sub, std::ostream& out) {
    const WeakLearnerEnsemble ensemble = load_ensemble(o.ensemble_path);
    const CostSchedule schedule = schedule_of(o, ensemble);
    const Bundle train = make_bundle(load_for(o.train_path, ensemble), ensemble);
    const fs::path dir = prepare_out_dir(o, sub);
    const PipelineConfig pc = pipeline_of(o);
    pc.validate();
    const LossContext ctx{train.phi, train.data.labels, ensemble.usage(), schedule, pc.loss};
    const TrainResult result = cstc::train(pc.shape(ensemble.num_learners()), ctx, pc.opt);
    save_model((dir / "model.json").string(), result.tree, ensemble);
    write_text((dir / "train_log.jsonl").string(), format_train_log(result.log));
    if (o.emit_dot)
        write_text((dir / "tree.dot").string(),
                   tree_to_dot(result.tree, ensemble.usage(), train.data.feature_names));
    emit(out, {{"command", "train"},
               {"nodes", result.tree.num_nodes()},
               {"sweeps", result.sweeps_run},
               {"converged", result.converged},
               {"loss", global_loss(result.tree, ctx)}});
}

void cmd_prune(const Options& o, const CLI::App& sub, std::ostream& out) {
    const WeakLearnerEnsemble ensemble = load_ensemble(o.ensemble_path);
    const CstcTree tree = load_model(o.model_path, ensemble);
    const Bundle valid = make_bundle(load_for(o.valid_path, ensemble), ensemble);
    const fs::path dir = prepare_out_dir(o, sub);
    const PruneResult r = prune(tree, valid.eval(), metric_of(o), o.prune_tolerance);
    save_model((dir / "model.json").string(), r.tree, ensemble);
    const json report = {{"removed", r.removed}, {"trajectory", r.trajectory}, {"nodes", r.tree.num_nodes()}};
    write_text((dir / "prune.json").string(), report.dump(2) + "\n");
    emit(out, {{"command", "prune"}, {"removed", r.removed.size()}, {"nodes", r.tree.num_nodes()}});
}

void cmd_finetune(const Options& o, const CLI::App& sub, std::ostream& out) {
    const WeakLearnerEnsemble ensemble = load_ensemble(o.ensemble_path);
    const CstcTree tree = load_model(o.model_path, ensemble);
    const Bundle train = make_bundle(load_for(o.train_path, ensemble), ensemble);
    std::optional<Bundle> valid;
    if (!o.valid_path.empty()) valid = make_bundle(load_for(o.valid_path, ensemble), ensemble);
    const fs::path dir = prepare_out_dir(o, sub);
    FineTuneConfig ft{o.rho, o.epsilon_aux, o.opt};
    const EvalSet held = valid ? valid->eval() : EvalSet{};
    const FineTuneResult r =
        fine_tune(tree, train.phi, train.data.labels, valid ? &held : nullptr, metric_of(o), ft);
    save_model((dir / "model.json").string(), r.tree, ensemble);
    json nodes = json::array();
    for (const auto& n : r.nodes)
        nodes.push_back({{"node", n.node}, {"support", n.support}, {"steps", n.steps}, {"stopped_early", n.stopped_early}});
    const json report = {{"nodes", nodes}, {"validation_trajectory", r.validation_trajectory}};
    write_text((dir / "finetune.json").string(), report.dump(2) + "\n");
    emit(out, {{"command", "finetune"}, {"nodes", r.nodes.size()}});
}

void cmd_eval(const Options& o, const CLI::App& sub, std::ostream& out) {
    const WeakLearnerEnsemble ensemble = load_ensemble(o.ensemble_path);
    const CstcTree tree = load_model(o.model_path, ensemble);
    const CostSchedule schedule = schedule_of(o, ensemble);
    const Bundle set = make_bundle(load_for(o.data_path, ensemble), ensemble);
    const fs::path dir = prepare_out_dir(o, sub);
    const CostReport cost = evaluate_cost(tree, ensemble, schedule, set.data.features);
    const Vector predictions = predict_all(tree, set.phi);
    json report = {{"mse", mean_squared_error(predictions, set.data.labels)},
                   {"ndcg", ndcg_at_k(predictions, set.data.labels, set.groups, o.ndcg_k)},
                   {"ndcg_k", o.ndcg_k},
                   {"mean_cost", cost.mean_total},
                   {"units", schedule.units}};
    if (o.per_instance) {
        json rows = json::array();
        for (const auto& c : cost.per_instance)
            rows.push_back({{"terminal", c.terminal},
                            {"evaluation_cost", c.evaluation_cost},
                            {"extraction_cost", c.extraction_cost},
                            {"total", c.total}});
        report["per_instance"] = std::move(rows);
    }
    write_text((dir / "eval.json").string(), report.dump(2) + "\n");
    report.erase("per_instance");
    report["command"] = "eval";
    emit(out, report);
}

void cmd_sweep(const Options& o, const CLI::App& sub, std::ostream& out) {
    const WeakLearnerEnsemble ensemble = load_ensemble(o.ensemble_path);
    const CostSchedule schedule = schedule_of(o, ensemble);
    Dataset train_data = load_for(o.train_path, ensemble);
    std::optional<Dataset> valid_data = validation_split(o, train_data);
    const Bundle train = make_bundle(std::move(train_data), ensemble);
    const Bundle test = make_bundle(load_for(o.test_path, ensemble), ensemble);
    std::optional<Bundle> valid;
    if (valid_data) valid = make_bundle(std::move(*valid_data), ensemble);
    const fs::path dir = prepare_out_dir(o, sub);

    const auto rows = sweep(o.lambdas.empty() ? kDefaultLambdas : o.lambdas, ensemble, schedule, train,
                            valid ? &*valid : nullptr, test, pipeline_of(o));
    write_text((dir / "curve.csv").string(), sweep_csv(rows));
    std::ostringstream plot;
    plot << std::setprecision(10);
    for (const auto& r : rows)
        if (r.ok) plot << r.test.mean_cost << ' ' << r.test_metric << '\n';
    write_text((dir / "curve.dat").string(), plot.str());
    std::size_t failed = 0;
    for (const auto& r : rows) failed += r.ok ? 0 : 1;
    emit(out, {{"command", "sweep"}, {"rows", rows.size()}, {"failed", failed}});
}

void cmd_report(const Options& o, const CLI::App& sub, std::ostream& out) {
    const WeakLearnerEnsemble ensemble = load_ensemble(o.ensemble_path);
    const CstcTree tree = load_model(o.model_path, ensemble);
    const CostSchedule schedule = schedule_of(o, ensemble);
    const Bundle set = make_bundle(load_for(o.data_path, ensemble), ensemble);
    const fs::path dir = prepare_out_dir(o, sub);

    const JaccardMatrix jm = jaccard_matrix(tree, ensemble.usage());
    json values = json::array();
    for (Eigen::Index a = 0; a < jm.values.rows(); ++a) {
        std::vector<double> row(jm.values.cols());
        for (Eigen::Index b = 0; b < jm.values.cols(); ++b) row[b] = jm.values(a, b);
        values.push_back(row);
    }
    write_text((dir / "jaccard.json").string(), json{{"nodes", jm.nodes}, {"values", values}}.dump(2) + "\n");

    std::ostringstream csv;
    csv << std::setprecision(10) << "cost_group,num_features";
    for (int d = 1; d <= tree.depth(); ++d) csv << ",depth_" << d;
    csv << '\n';
    for (const auto& row : depth_feature_fractions(tree, schedule, ensemble.usage())) {
        csv << row.cost_group << ',' << row.num_features;
        for (double f : row.by_depth) csv << ',' << f;
        csv << '\n';
    }
    write_text((dir / "depth_fractions.csv").string(), csv.str());

    const Vector means = node_label_means(tree, set.phi, set.data.labels);
    json jmeans = json::array();
    for (int k = 0; k < tree.num_nodes(); ++k)
        jmeans.push_back({{"node", k}, {"mean_label", std::isfinite(means[k]) ? json(means[k]) : json(nullptr)}});
    write_text((dir / "node_means.json").string(), jmeans.dump(2) + "\n");
    if (o.emit_dot)
        write_text((dir / "tree.dot").string(), tree_to_dot(tree, ensemble.usage(), set.data.feature_names, &means));
    emit(out, {{"command", "report"}, {"predictive_nodes", jm.nodes.size()}});
}

// --- flag groups -----------------------------------------------------------

void add_tree_flags(CLI::App* c, Options& o) {
    c->add_option("--depth", o.depth, "tree depth D")->check(CLI::PositiveNumber);
    c->add_option("--max-nodes", o.max_nodes, "cap on classifier nodes (0: full tree)")
        ->check(CLI::NonNegativeNumber);
}

void add_loss_flags(CLI::App* c, Options& o, bool with_lambda) {
    if (with_lambda) c->add_option("--lambda", o.lambda, "accuracy/cost trade-off")->check(CLI::NonNegativeNumber);
    c->add_option("--rho", o.rho, "l1 regularization")->check(CLI::NonNegativeNumber);
    c->add_option("--epsilon-aux", o.epsilon_aux, "floor of the auxiliary variables")->check(CLI::PositiveNumber);
}

void add_opt_flags(CLI::App* c, Options& o) {
    c->add_option("--sweeps", o.opt.sweeps, "global block-coordinate sweeps")->check(CLI::NonNegativeNumber);
    c->add_option("--cg-iters", o.opt.cg_iters, "CG steps per alternation")->check(CLI::PositiveNumber);
    c->add_option("--alternations", o.opt.alternations, "CG/auxiliary alternations per node")
        ->check(CLI::PositiveNumber);
    c->add_option("--tol", o.opt.tol, "relative convergence tolerance")->check(CLI::Range(1e-15, 0.999999));
    c->add_option("--initial-aux", o.opt.initial_aux, "auxiliary start for freshly initialized nodes")
        ->check(CLI::PositiveNumber);
}

void add_metric_flags(CLI::App* c, Options& o) {
    c->add_option("--metric", o.metric, "validation metric")->check(CLI::IsMember({"mse", "ndcg"}));
    c->add_option("--ndcg-k", o.ndcg_k, "NDCG truncation")->check(CLI::PositiveNumber);
}

void add_gbrt_flags(CLI::App* c, GbrtConfig& g) {
    c->add_option("--rounds", g.rounds, "boosting rounds T")->check(CLI::PositiveNumber);
    c->add_option("--max-depth", g.max_depth, "weak learner depth")->check(CLI::PositiveNumber);
    c->add_option("--shrinkage", g.shrinkage, "learning rate")->check(CLI::Range(1e-12, 1.0));
    c->add_option("--min-leaf", g.min_samples_leaf, "minimum samples per leaf")->check(CLI::PositiveNumber);
}

void add_common(CLI::App* c, Options& o) {
    c->add_option("--out-dir", o.out_dir, "directory for outputs and config.json");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Cost-sensitive tree of classifiers"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "quadrant experiment end to end");
    add_common(synth, o);
    synth->add_option("--seed", o.seed, "master seed");
    synth->add_option("--n", o.n, "training size")->check(CLI::PositiveNumber);
    synth->add_option("--valid-n", o.valid_n, "validation size")->check(CLI::PositiveNumber);
    synth->add_option("--test-n", o.test_n, "test size")->check(CLI::PositiveNumber);
    synth->add_option("--depth", o.depth, "tree depth D")->check(CLI::PositiveNumber);
    synth->add_option("--lambdas", o.lambdas, "lambda grid")->delimiter(',');
    synth->add_option("--rho", o.rho, "l1 regularization")->check(CLI::NonNegativeNumber);
    add_opt_flags(synth, o);
    synth->add_flag("--emit-dot", o.emit_dot, "write tree.dot");

    auto* rank = app.add_subcommand("rank-surrogate", "generate ranking data; optionally run the trade-off experiment");
    add_common(rank, o);
    rank->add_option("--seed", o.seed, "master seed");
    rank->add_option("--queries", o.queries, "number of queries")->check(CLI::PositiveNumber);
    rank->add_option("--docs", o.docs, "documents per query")->check(CLI::PositiveNumber);
    rank->add_option("--features", o.features, "number of features")->check(CLI::PositiveNumber);
    rank->add_flag("--experiment", o.experiment, "also run the tree and single-node lambda sweeps");
    rank->add_option("--lambdas", o.lambdas, "lambda grid")->delimiter(',');
    add_gbrt_flags(rank, o.rank_gbrt);
    add_tree_flags(rank, o);
    add_opt_flags(rank, o);

    auto* fit = app.add_subcommand("fit-ensemble", "fit the boosted feature map");
    add_common(fit, o);
    fit->add_option("--train", o.train_path, "training data")->required();
    fit->add_flag("--identity", o.identity, "use raw features (phi(x) = x)");
    add_gbrt_flags(fit, o.gbrt);

    auto* train = app.add_subcommand("train", "train a tree");
    add_common(train, o);
    train->add_option("--train", o.train_path, "training data")->required();
    train->add_option("--ensemble", o.ensemble_path, "ensemble.json")->required();
    train->add_option("--costs", o.costs_path, "feature cost file")->required();
    add_tree_flags(train, o);
    add_loss_flags(train, o, true);
    add_opt_flags(train, o);
    train->add_flag("--emit-dot", o.emit_dot, "write tree.dot");

    auto* prune_cmd = app.add_subcommand("prune", "validation-driven pruning");
    add_common(prune_cmd, o);
    prune_cmd->add_option("--model", o.model_path, "model.json")->required();
    prune_cmd->add_option("--ensemble", o.ensemble_path, "ensemble.json")->required();
    prune_cmd->add_option("--valid", o.valid_path, "validation data")->required();
    prune_cmd->add_option("--tolerance", o.prune_tolerance, "allowed metric loss per removal")
        ->check(CLI::NonNegativeNumber);
    add_metric_flags(prune_cmd, o);

    auto* finetune = app.add_subcommand("finetune", "re-fit predictive nodes on their support");
    add_common(finetune, o);
    finetune->add_option("--model", o.model_path, "model.json")->required();
    finetune->add_option("--ensemble", o.ensemble_path, "ensemble.json")->required();
    finetune->add_option("--train", o.train_path, "training data")->required();
    finetune->add_option("--valid", o.valid_path, "validation data for early stopping");
    add_loss_flags(finetune, o, false);
    add_opt_flags(finetune, o);
    add_metric_flags(finetune, o);

    auto* eval = app.add_subcommand("eval", "accuracy and test-time cost");
    add_common(eval, o);
    eval->add_option("--model", o.model_path, "model.json")->required();
    eval->add_option("--ensemble", o.ensemble_path, "ensemble.json")->required();
    eval->add_option("--costs", o.costs_path, "feature cost file")->required();
    eval->add_option("--data", o.data_path, "evaluation data")->required();
    eval->add_option("--ndcg-k", o.ndcg_k, "NDCG truncation")->check(CLI::PositiveNumber);
    eval->add_flag("--per-instance", o.per_instance, "include per-instance costs");

    auto* sweep_cmd = app.add_subcommand("sweep", "lambda sweep to a cost/metric curve");
    add_common(sweep_cmd, o);
    sweep_cmd->add_option("--train", o.train_path, "training data")->required();
    sweep_cmd->add_option("--test", o.test_path, "test data")->required();
    sweep_cmd->add_option("--ensemble", o.ensemble_path, "ensemble.json")->required();
    sweep_cmd->add_option("--costs", o.costs_path, "feature cost file")->required();
    auto* valid_file = sweep_cmd->add_option("--valid", o.valid_path, "validation data");
    sweep_cmd->add_option("--valid-ratio", o.valid_ratio, "hold out this fraction of training queries")
        ->check(CLI::Range(0.0, 0.99))
        ->excludes(valid_file);
    sweep_cmd->add_option("--seed", o.seed, "seed for the validation split");
    sweep_cmd->add_option("--lambdas", o.lambdas, "lambda grid (default 1/3,1/2,1,...,6)")->delimiter(',');
    sweep_cmd->add_option("--tolerance", o.prune_tolerance, "pruning tolerance")->check(CLI::NonNegativeNumber);
    sweep_cmd->add_flag("--no-prune", o.no_prune, "skip pruning");
    sweep_cmd->add_flag("--no-finetune", o.no_fine_tune, "skip fine-tuning");
    add_tree_flags(sweep_cmd, o);
    add_loss_flags(sweep_cmd, o, false);
    add_opt_flags(sweep_cmd, o);
    add_metric_flags(sweep_cmd, o);

    auto* report = app.add_subcommand("report", "Jaccard matrix, depth fractions, node label means");
    add_common(report, o);
    report->add_option("--model", o.model_path, "model.json")->required();
    report->add_option("--ensemble", o.ensemble_path, "ensemble.json")->required();
    report->add_option("--costs", o.costs_path, "feature cost file")->required();
    report->add_option("--data", o.data_path, "data for node label means")->required();
    report->add_flag("--emit-dot", o.emit_dot, "write tree.dot");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }

    try {
        const std::vector<std::pair<CLI::App*, void (*)(const Options&, const CLI::App&, std::ostream&)>> table{
            {synth, cmd_synth},   {rank, cmd_rank_surrogate}, {fit, cmd_fit_ensemble},
            {train, cmd_train},   {prune_cmd, cmd_prune},     {finetune, cmd_finetune},
            {eval, cmd_eval},     {sweep_cmd, cmd_sweep},     {report, cmd_report}};
        for (const auto& [sub, handler] : table)
            if (sub->parsed()) handler(o, *sub, out);
    } catch (const std::exception& e) {
        std::string kind = "runtime";
        if (dynamic_cast<const InvalidInput*>(&e)) kind = "invalid_input";
        if (dynamic_cast<const ParseError*>(&e)) kind = "parse";
        if (dynamic_cast<const NumericalError*>(&e)) kind = "numerical";
        err << json{{"error", kind}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"cstc"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace cstc
