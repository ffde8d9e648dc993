#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cstc/objective.hpp"

namespace cstc {

/// Independent generator for a named stream of a master seed.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

struct Dataset {
    Matrix features;               // n x d
    Vector labels;                 // n
    std::vector<long> query_ids;   // empty, or n entries
    std::vector<std::string> feature_names;

    Eigen::Index size() const noexcept { return features.rows(); }
    int num_features() const noexcept { return static_cast<int>(features.cols()); }
    bool has_queries() const noexcept { return !query_ids.empty(); }
    /// Row subset, preserving order.
    Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

/// Contiguous row ranges sharing a query id; rows of a query must be adjacent.
std::vector<std::vector<Eigen::Index>> query_groups(const Dataset& data);

/// Quadrant order used throughout: ++, +-, -+, -- (sign of x, then sign of z).
struct SyntheticConfig {
    int n = 4000;
    std::array<double, 4> means{3.0, 1.0, -1.0, -3.0};
    double noise_sd = 1.0;
    double decoy_mean = 0.0;
    double decoy_sd = 1.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SyntheticData {
    Dataset data;                // columns: sign(x), sign(z), y_++, y_+-, y_-+, y_--
    CostSchedule schedule;       // c = [1, 1, 10, 10, 10, 10], e = 0
    std::vector<int> quadrant;   // 0..3 per row
};

SyntheticData generate_synthetic(const SyntheticConfig& cfg);

/// Quadrant of a synthetic feature row, from its two sign features.
int synthetic_quadrant(const Eigen::Ref<const Vector>& row);

/// Desk-scale learning-to-rank stand-in (not the Yahoo! data): graded
/// relevance 0..4 driven by a coarse latent read by cheap features and a
/// fine latent that only expensive features reveal, and only for documents
/// of high coarse relevance.
struct RankingConfig {
    int queries = 200;
    int docs_per_query = 20;
    int num_features = 60;
    std::vector<double> cost_levels{1, 5, 20, 50, 100, 150, 200};
    std::uint64_t seed = 1;

    void validate() const;
};

struct RankingData {
    Dataset data;
    Vector feature_costs;
};

RankingData generate_ranking_surrogate(const RankingConfig& cfg);

/// Dense CSV (header row; "label" column required, "qid" optional) or sparse
/// "label [qid:Q] index:value ..." rows with 0-based feature indices.
/// `num_features` fixes d for sparse files; otherwise d = max index + 1.
Dataset load_dataset(const std::string& path, std::optional<int> num_features = std::nullopt);
void save_dataset_csv(const std::string& path, const Dataset& data);

/// Lines "feature_index cost [learner_cost]"; '#' starts a comment. Every
/// feature must be listed exactly once. A third column overrides the
/// evaluation cost of the weak learner with the same index.
CostSchedule load_costs(const std::string& path, int num_features, const Vector& default_learner_costs);
void save_costs(const std::string& path, const Vector& feature_costs);

}  // namespace cstc
