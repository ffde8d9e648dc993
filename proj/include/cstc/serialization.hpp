#pragma once

#include <string>

#include <json.hpp>

#include "cstc/ensemble.hpp"
#include "cstc/model.hpp"

namespace cstc {

inline constexpr int kModelSchemaVersion = 1;

nlohmann::json ensemble_to_json(const WeakLearnerEnsemble& ensemble);
WeakLearnerEnsemble ensemble_from_json(const nlohmann::json& j);

/// Hex SHA-256 of the ensemble's canonical JSON text. Models record it so
/// they are never applied to a different feature map.
std::string ensemble_hash(const WeakLearnerEnsemble& ensemble);

/// Topology, per-node sparse weights and thresholds, fine-tuned weights
/// when present, and the hash of the ensemble the model was trained on.
nlohmann::json model_to_json(const CstcTree& tree, const std::string& ensemble_sha256);
/// Rejects documents with an unknown schema version or whose recorded hash
/// differs from `expected_sha256`.
CstcTree model_from_json(const nlohmann::json& j, const std::string& expected_sha256);

void save_ensemble(const std::string& path, const WeakLearnerEnsemble& ensemble);
WeakLearnerEnsemble load_ensemble(const std::string& path);
void save_model(const std::string& path, const CstcTree& tree, const WeakLearnerEnsemble& ensemble);
CstcTree load_model(const std::string& path, const WeakLearnerEnsemble& ensemble);

/// Reads a whole file; throws ParseError when it cannot be opened.
std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace cstc
