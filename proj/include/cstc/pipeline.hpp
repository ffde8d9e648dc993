#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cstc/data.hpp"
#include "cstc/evaluation.hpp"
#include "cstc/optimizer.hpp"
#include "cstc/postprocess.hpp"

namespace cstc {

/// A dataset together with its feature map under one ensemble.
struct Bundle {
    Dataset data;
    Matrix phi;
    std::vector<std::vector<Eigen::Index>> groups;

    EvalSet eval() const { return EvalSet{phi, data.labels, groups}; }
};

Bundle make_bundle(Dataset data, const WeakLearnerEnsemble& ensemble);

/// Moves a `holdout` fraction of whole queries (rows, without query ids)
/// into the second part. The first part keeps the original row order.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double holdout, std::uint64_t seed);

struct PipelineConfig {
    int depth = 3;
    int max_nodes = 0;  // 0: no cap beyond the full tree
    LossConfig loss;
    OptimizerConfig opt;
    bool prune = true;
    double prune_tolerance = 0.0;
    bool fine_tune = true;
    double fine_tune_rho = 0.0;
    ValidationMetric metric;

    void validate() const;
    CstcTree shape(int num_learners) const;
};

struct FitResult {
    TrainResult training;
    std::optional<PruneResult> pruned;
    std::optional<FineTuneResult> tuned;
    CstcTree model;
};

/// Train, then prune and fine-tune as configured. Pruning needs `valid`;
/// without it only fine-tuning runs, to convergence.
FitResult fit_cstc(const Bundle& train, const Bundle* valid, const CostSchedule& schedule, const Matrix& usage,
                   const PipelineConfig& cfg);

/// Largest increase between consecutive entries of every loss trace recorded
/// during training (0 for a non-increasing run).
double max_loss_increase(const TrainResult& result);

struct ModelMetrics {
    double mse = 0.0;
    double ndcg = 0.0;  // NDCG@k over the set's queries (one query when it has none)
    double mean_cost = 0.0;
    int nodes = 0;
};

ModelMetrics measure(const CstcTree& tree, const WeakLearnerEnsemble& ensemble, const CostSchedule& schedule,
                     const Bundle& set, int k = 5);

struct SweepRow {
    double lambda = 0.0;
    bool ok = false;
    std::string error;
    ModelMetrics validation;
    ModelMetrics test;
    double test_metric = 0.0;  // the configured metric on the test set
    double seconds = 0.0;
    double max_loss_increase = 0.0;
    std::optional<CstcTree> model;
};

/// One fresh model per lambda, each evaluated on `test`. A failing lambda is
/// recorded with its error and the sweep moves on.
std::vector<SweepRow> sweep(const std::vector<double>& lambdas, const WeakLearnerEnsemble& ensemble,
                            const CostSchedule& schedule, const Bundle& train, const Bundle* valid, const Bundle& test,
                            const PipelineConfig& cfg);

std::string sweep_csv(const std::vector<SweepRow>& rows);

struct SyntheticExperimentConfig {
    SyntheticConfig data;  // data.n is the training size
    int valid_n = 1000;
    int test_n = 1000;
    int depth = 3;
    std::vector<double> lambdas{0.05, 0.1, 0.15, 0.2, 0.25};
    double rho = 0.0;
    OptimizerConfig opt;
};

struct SyntheticStructure {
    /// Raw features available to each terminal's predictor (path-cumulative).
    std::vector<std::vector<char>> path_features;
    /// Every path reads sign(x), sign(z) and exactly one y feature.
    bool paths_ok = false;
    /// Fraction of instances whose routed path reads the y feature of their own quadrant.
    double routing_accuracy = 0.0;
};

SyntheticStructure synthetic_structure(const CstcTree& tree, const SyntheticData& set);

struct SyntheticOutcome {
    std::vector<SweepRow> grid;
    double chosen_lambda = 0.0;
    CstcTree model = CstcTree::full(1, 1);
    double test_mse = 0.0;
    double label_variance = 0.0;  // of the test labels
    double mean_cost = 0.0;
    SyntheticStructure structure;
    double seconds = 0.0;
};

/// Trains, prunes and fine-tunes one model per lambda on the quadrant data.
/// The chosen lambda is the cheapest (by validation cost) whose validation
/// MSE is below a tenth of the training label variance, or else the one with
/// the lowest validation MSE.
SyntheticOutcome run_synthetic(const SyntheticExperimentConfig& cfg);

struct RankingExperimentConfig {
    RankingConfig data;
    GbrtConfig gbrt{50, 3, 0.1, 1};
    double valid_fraction = 0.2;
    double test_fraction = 0.2;
    int depth = 3;
    int max_nodes = 0;
    std::vector<double> lambdas{0.0, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
    OptimizerConfig opt;
};

struct RankingOutcome {
    double ensemble_ndcg = 0.0;  // H'(x) on the test queries
    double lambda0_cost = 0.0;
    std::vector<SweepRow> tree;    // CSTC curve
    std::vector<SweepRow> single;  // one-node (D = 1) curve
};

RankingOutcome run_ranking(const RankingExperimentConfig& cfg);

/// Graphviz description: classifier nodes as circles labelled with their
/// threshold, newly extracted features and (optionally) mean label; terminals
/// as filled squares.
std::string tree_to_dot(const CstcTree& tree, const Matrix& usage, const std::vector<std::string>& feature_names,
                        const Vector* node_means = nullptr);

}  // namespace cstc
