#include "cstc/serialization.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "cstc/error.hpp"

namespace cstc {

using nlohmann::json;

namespace {

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j, Eigen::Index expected, const char* what) {
    const auto values = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != expected)
        throw InvalidInput(std::string(what) + ": expected " + std::to_string(expected) + " entries");
    Vector v(expected);
    for (Eigen::Index i = 0; i < expected; ++i) v[i] = values[static_cast<std::size_t>(i)];
    return v;
}

json sparse_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index t = 0; t < v.size(); ++t)
        if (v[t] != 0.0) out.push_back({t, v[t]});
    return out;
}

Vector sparse_from_json(const json& j, int length) {
    Vector v = Vector::Zero(length);
    for (const auto& entry : j) {
        const auto t = entry.at(0).get<long>();
        if (t < 0 || t >= length) throw InvalidInput("sparse weight index out of range: " + std::to_string(t));
        v[t] = entry.at(1).get<double>();
    }
    return v;
}

json child_to_json(const ChildRef& c) { return c.is_terminal() ? json(-1) : json(c.index); }

ChildRef child_from_json(const json& j) {
    const int index = j.get<int>();
    return index < 0 ? ChildRef{ChildRef::Kind::terminal, -1} : ChildRef{ChildRef::Kind::classifier, index};
}

std::string sha256_hex(const std::string& text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 computation failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < length; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

json parse_file(const std::string& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path, 0, e.what());
    }
}

}  // namespace

json ensemble_to_json(const WeakLearnerEnsemble& ensemble) {
    json j;
    j["mode"] = ensemble.mode() == WeakLearnerEnsemble::Mode::identity ? "identity" : "boosted";
    j["num_features"] = ensemble.num_features();
    j["num_learners"] = ensemble.num_learners();
    j["eval_costs"] = vector_to_json(ensemble.eval_costs());
    json trees = json::array();
    for (const RegressionTree& tree : ensemble.trees()) {
        json nodes = json::array();
        for (const auto& n : tree.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    // F as one [feature, [learners...]] entry per used feature
    json usage = json::array();
    const Matrix& f = ensemble.usage();
    for (Eigen::Index a = 0; a < f.rows(); ++a) {
        std::vector<long> learners;
        for (Eigen::Index t = 0; t < f.cols(); ++t)
            if (f(a, t) != 0.0) learners.push_back(t);
        if (!learners.empty()) usage.push_back({a, learners});
    }
    j["usage"] = std::move(usage);
    return j;
}

WeakLearnerEnsemble ensemble_from_json(const json& j) {
    try {
        const std::string mode = j.at("mode").get<std::string>();
        const int d = j.at("num_features").get<int>();
        const int T = j.at("num_learners").get<int>();
        WeakLearnerEnsemble out = WeakLearnerEnsemble::identity(std::max(d, 1));
        if (mode == "identity") {
            if (T != d) throw InvalidInput("identity ensemble must have as many learners as features");
            out = WeakLearnerEnsemble::identity(d);
            out.set_eval_costs(vector_from_json(j.at("eval_costs"), T, "eval_costs"));
        } else if (mode == "boosted") {
            std::vector<RegressionTree> trees;
            for (const auto& jt : j.at("trees")) {
                RegressionTree tree;
                for (const auto& jn : jt)
                    tree.nodes.push_back({jn.at(0).get<int>(), jn.at(1).get<double>(), jn.at(2).get<int>(),
                                          jn.at(3).get<int>(), jn.at(4).get<double>()});
                trees.push_back(std::move(tree));
            }
            if (static_cast<int>(trees.size()) != T) throw InvalidInput("num_learners does not match the tree list");
            out = WeakLearnerEnsemble::from_trees(d, std::move(trees), vector_from_json(j.at("eval_costs"), T, "eval_costs"));
        } else {
            throw InvalidInput("unknown ensemble mode '" + mode + "'");
        }
        if (j.contains("usage")) {
            Matrix stored = Matrix::Zero(out.num_features(), out.num_learners());
            for (const auto& row : j.at("usage")) {
                const auto a = row.at(0).get<long>();
                if (a < 0 || a >= stored.rows()) throw InvalidInput("usage row index out of range");
                for (long t : row.at(1).get<std::vector<long>>()) {
                    if (t < 0 || t >= stored.cols()) throw InvalidInput("usage learner index out of range");
                    stored(a, t) = 1.0;
                }
            }
            if (stored != out.usage()) throw InvalidInput("stored usage matrix disagrees with the trees");
        }
        return out;
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed ensemble document: ") + e.what());
    }
}

std::string ensemble_hash(const WeakLearnerEnsemble& ensemble) { return sha256_hex(ensemble_to_json(ensemble).dump()); }

json model_to_json(const CstcTree& tree, const std::string& ensemble_sha256) {
    json nodes = json::array();
    for (int k = 0; k < tree.num_nodes(); ++k) {
        const ClassifierNode& n = tree.node(k);
        json jn = {{"index", k},
                   {"parent", n.parent},
                   {"depth", n.depth},
                   {"upper", child_to_json(n.upper)},
                   {"lower", child_to_json(n.lower)},
                   {"theta", n.theta},
                   {"beta", sparse_to_json(n.beta)}};
        if (n.tuned_beta) jn["tuned_beta"] = sparse_to_json(*n.tuned_beta);
        nodes.push_back(std::move(jn));
    }
    return {{"schema_version", kModelSchemaVersion},
            {"num_learners", tree.num_learners()},
            {"ensemble_sha256", ensemble_sha256},
            {"nodes", std::move(nodes)}};
}

CstcTree model_from_json(const json& j, const std::string& expected_sha256) {
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != kModelSchemaVersion)
            throw InvalidInput("unsupported model schema version " + std::to_string(version));
        const std::string recorded = j.at("ensemble_sha256").get<std::string>();
        if (recorded != expected_sha256)
            throw InvalidInput("model was trained against a different ensemble (hash " + recorded + ")");
        const int T = j.at("num_learners").get<int>();
        std::vector<ClassifierNode> nodes;
        for (const auto& jn : j.at("nodes")) {
            if (jn.at("index").get<int>() != static_cast<int>(nodes.size()))
                throw InvalidInput("model nodes must be listed in index order");
            ClassifierNode n;
            n.parent = jn.at("parent").get<int>();
            n.depth = jn.at("depth").get<int>();
            n.upper = child_from_json(jn.at("upper"));
            n.lower = child_from_json(jn.at("lower"));
            n.theta = jn.at("theta").get<double>();
            n.beta = sparse_from_json(jn.at("beta"), T);
            if (jn.contains("tuned_beta")) n.tuned_beta = sparse_from_json(jn.at("tuned_beta"), T);
            nodes.push_back(std::move(n));
        }
        return CstcTree::from_parts(T, std::move(nodes));
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed model document: ") + e.what());
    }
}

void save_ensemble(const std::string& path, const WeakLearnerEnsemble& ensemble) {
    write_text(path, ensemble_to_json(ensemble).dump(1) + "\n");
}

WeakLearnerEnsemble load_ensemble(const std::string& path) { return ensemble_from_json(parse_file(path)); }

void save_model(const std::string& path, const CstcTree& tree, const WeakLearnerEnsemble& ensemble) {
    if (tree.num_learners() != ensemble.num_learners())
        throw InvalidInput("model and ensemble disagree on the number of weak learners");
    write_text(path, model_to_json(tree, ensemble_hash(ensemble)).dump(1) + "\n");
}

CstcTree load_model(const std::string& path, const WeakLearnerEnsemble& ensemble) {
    return model_from_json(parse_file(path), ensemble_hash(ensemble));
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, "cannot open file");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("failed while writing " + path);
}

}  // namespace cstc
