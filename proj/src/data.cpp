#include "cstc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cstc/error.hpp"

namespace cstc {

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
    return std::mt19937_64(seq);
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.resize(static_cast<Eigen::Index>(rows.size()));
    out.feature_names = feature_names;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
        out.labels[static_cast<Eigen::Index>(i)] = labels[rows[i]];
        if (has_queries()) out.query_ids.push_back(query_ids[rows[i]]);
    }
    return out;
}

std::vector<std::vector<Eigen::Index>> query_groups(const Dataset& data) {
    std::vector<std::vector<Eigen::Index>> groups;
    if (!data.has_queries()) {
        groups.emplace_back(data.size());
        for (Eigen::Index i = 0; i < data.size(); ++i) groups.back()[i] = i;
        return groups;
    }
    std::map<long, bool> seen;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const long q = data.query_ids[i];
        if (i == 0 || q != data.query_ids[i - 1]) {
            if (seen.count(q)) throw InvalidInput("rows of query " + std::to_string(q) + " are not contiguous");
            seen[q] = true;
            groups.emplace_back();
        }
        groups.back().push_back(i);
    }
    return groups;
}

void SyntheticConfig::validate() const {
    if (n < 1) throw InvalidInput("synthetic n must be >= 1");
    if (!(noise_sd > 0.0)) throw InvalidInput("synthetic noise_sd must be > 0");
    if (!(decoy_sd > 0.0)) throw InvalidInput("synthetic decoy_sd must be > 0");
}

int synthetic_quadrant(const Eigen::Ref<const Vector>& row) {
    const bool x_pos = row[0] > 0.0;
    const bool z_pos = row[1] > 0.0;
    return (x_pos ? 0 : 2) + (z_pos ? 0 : 1);
}

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    auto rng = make_stream(cfg.seed, 0);
    std::uniform_real_distribution<double> plane(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, cfg.noise_sd);
    std::normal_distribution<double> decoy(cfg.decoy_mean, cfg.decoy_sd);

    SyntheticData out;
    out.data.features.resize(cfg.n, 6);
    out.data.labels.resize(cfg.n);
    out.data.feature_names = {"sign_x", "sign_z", "y_pp", "y_pm", "y_mp", "y_mm"};
    out.quadrant.resize(cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
        const double x = plane(rng);
        const double z = plane(rng);
        const double sx = x >= 0.0 ? 1.0 : -1.0;  // sign(0) = +1
        const double sz = z >= 0.0 ? 1.0 : -1.0;
        const int q = (sx > 0 ? 0 : 2) + (sz > 0 ? 0 : 1);
        const double label = cfg.means[q] + noise(rng);
        out.data.features(i, 0) = sx;
        out.data.features(i, 1) = sz;
        for (int j = 0; j < 4; ++j) out.data.features(i, 2 + j) = j == q ? label : decoy(rng);
        out.data.labels[i] = label;
        out.quadrant[i] = q;
    }
    out.schedule.feature_costs = (Vector(6) << 1, 1, 10, 10, 10, 10).finished();
    out.schedule.learner_costs = Vector::Zero(6);
    out.schedule.units = "synthetic cost units";
    return out;
}

void RankingConfig::validate() const {
    if (queries < 1 || docs_per_query < 1 || num_features < 1)
        throw InvalidInput("ranking surrogate needs queries, docs_per_query and num_features >= 1");
    if (cost_levels.empty()) throw InvalidInput("ranking surrogate needs at least one cost level");
    for (double c : cost_levels)
        if (!(c > 0.0) || !std::isfinite(c)) throw InvalidInput("cost levels must be finite and positive");
}

RankingData generate_ranking_surrogate(const RankingConfig& cfg) {
    cfg.validate();
    const int d = cfg.num_features;
    const int levels = static_cast<int>(cfg.cost_levels.size());

    // features are stratified into equal contiguous blocks, cheapest first
    std::vector<double> levels_sorted = cfg.cost_levels;
    std::sort(levels_sorted.begin(), levels_sorted.end());
    RankingData out;
    out.feature_costs.resize(d);
    std::vector<std::vector<int>> block(levels);
    for (int a = 0; a < d; ++a) {
        const int level = static_cast<int>((static_cast<long>(a) * levels) / d);
        out.feature_costs[a] = levels_sorted[level];
        block[level].push_back(a);
    }

    // planted roles: coarse features read the coarse latent with the given
    // noise, fine features read the fine latent for relevant documents only
    struct Role {
        enum Kind { noise, coarse, fine } kind = noise;
        double sd = 1.0;
    };
    std::vector<Role> role(d);
    auto plant = [&](int level, std::size_t slot, Role::Kind kind, double sd) {
        if (level < levels && slot < block[level].size()) role[block[level][slot]] = Role{kind, sd};
    };
    plant(0, 0, Role::coarse, 0.6);
    plant(0, 1, Role::coarse, 0.6);
    plant(0, 2, Role::coarse, 0.7);
    plant(1, 0, Role::coarse, 0.4);
    plant(1, 1, Role::coarse, 0.45);
    plant(2, 0, Role::fine, 0.6);
    plant(3, 0, Role::fine, 0.4);
    plant(3, 1, Role::coarse, 0.2);
    plant(4, 0, Role::fine, 0.25);
    plant(levels - 1, 0, Role::fine, 0.1);

    auto rng = make_stream(cfg.seed, 1);
    std::normal_distribution<double> standard(0.0, 1.0);
    const long n = static_cast<long>(cfg.queries) * cfg.docs_per_query;
    Dataset& data = out.data;
    data.features.resize(n, d);
    data.labels.resize(n);
    data.query_ids.resize(n);
    for (int a = 0; a < d; ++a) data.feature_names.push_back("f" + std::to_string(a));

    constexpr double relevant_cut = 0.3;
    for (long i = 0; i < n; ++i) {
        const double coarse = standard(rng);
        const double fine = standard(rng);
        const bool relevant = coarse >= relevant_cut;
        int label;
        if (!relevant)
            label = coarse < -0.4 ? 0 : 1;
        else
            label = fine < -0.5 ? 2 : (fine < 0.5 ? 3 : 4);
        data.labels[i] = label;
        data.query_ids[i] = i / cfg.docs_per_query;
        for (int a = 0; a < d; ++a) {
            const double eps = standard(rng);
            switch (role[a].kind) {
                case Role::coarse: data.features(i, a) = coarse + role[a].sd * eps; break;
                case Role::fine: data.features(i, a) = relevant ? fine + role[a].sd * eps : eps; break;
                case Role::noise: data.features(i, a) = eps; break;
            }
        }
    }
    return out;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& token, const std::string& path, long line) {
    std::size_t used = 0;
    double v;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        throw ParseError(path, line, "cannot parse number '" + token + "'");
    }
    if (used != token.size()) throw ParseError(path, line, "cannot parse number '" + token + "'");
    if (!std::isfinite(v)) throw ParseError(path, line, "non-finite value '" + token + "'");
    return v;
}

long parse_index(const std::string& token, const std::string& path, long line) {
    std::size_t used = 0;
    long v;
    try {
        v = std::stol(token, &used);
    } catch (const std::exception&) {
        throw ParseError(path, line, "cannot parse index '" + token + "'");
    }
    if (used != token.size() || v < 0) throw ParseError(path, line, "invalid index '" + token + "'");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

Dataset load_csv(const std::string& path, std::ifstream& in, const std::string& header_line) {
    const auto header = split(header_line, ',');
    int label_col = -1, qid_col = -1;
    Dataset data;
    std::vector<int> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "label")
            label_col = static_cast<int>(c);
        else if (header[c] == "qid")
            qid_col = static_cast<int>(c);
        else {
            feature_cols.push_back(static_cast<int>(c));
            data.feature_names.push_back(header[c]);
        }
    }
    if (label_col < 0) throw ParseError(path, 1, "header has no 'label' column");
    if (feature_cols.empty()) throw ParseError(path, 1, "header has no feature columns");

    std::vector<std::vector<double>> rows;
    std::vector<double> labels;
    std::string line;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != header.size())
            throw ParseError(path, lineno,
                             "expected " + std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(feature_cols.size());
        for (int c : feature_cols) row.push_back(parse_number(cells[c], path, lineno));
        labels.push_back(parse_number(cells[label_col], path, lineno));
        if (qid_col >= 0) data.query_ids.push_back(parse_index(cells[qid_col], path, lineno));
        rows.push_back(std::move(row));
    }
    data.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_cols.size()));
    data.labels.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < rows[i].size(); ++c)
            data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
        data.labels[static_cast<Eigen::Index>(i)] = labels[i];
    }
    return data;
}

Dataset load_sparse(const std::string& path, std::ifstream& in, std::optional<int> num_features) {
    struct Row {
        double label;
        long qid;
        std::vector<std::pair<long, double>> entries;
    };
    std::vector<Row> rows;
    bool any_qid = false, all_qid = true;
    long max_index = -1;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream is(line);
        std::string token;
        if (!(is >> token)) continue;
        Row row{parse_number(token, path, lineno), -1, {}};
        bool has_qid = false;
        while (is >> token) {
            const auto colon = token.find(':');
            if (colon == std::string::npos) throw ParseError(path, lineno, "expected index:value, got '" + token + "'");
            const std::string key = token.substr(0, colon);
            const std::string value = token.substr(colon + 1);
            if (key == "qid") {
                row.qid = parse_index(value, path, lineno);
                has_qid = true;
                continue;
            }
            const long idx = parse_index(key, path, lineno);
            if (num_features && idx >= *num_features)
                throw ParseError(path, lineno, "feature index " + key + " out of range");
            max_index = std::max(max_index, idx);
            row.entries.emplace_back(idx, parse_number(value, path, lineno));
        }
        any_qid = any_qid || has_qid;
        all_qid = all_qid && has_qid;
        rows.push_back(std::move(row));
    }
    if (any_qid && !all_qid) throw ParseError(path, 0, "qid present on some rows but not all");
    const long d = num_features ? *num_features : max_index + 1;
    if (d < 1) throw ParseError(path, 0, "no features found");

    Dataset data;
    data.features = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), d);
    data.labels.resize(static_cast<Eigen::Index>(rows.size()));
    for (long a = 0; a < d; ++a) data.feature_names.push_back("f" + std::to_string(a));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        data.labels[r] = rows[i].label;
        for (const auto& [idx, v] : rows[i].entries) data.features(r, idx) = v;
        if (any_qid) data.query_ids.push_back(rows[i].qid);
    }
    return data;
}

}  // namespace

Dataset load_dataset(const std::string& path, std::optional<int> num_features) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    std::string first;
    std::streampos start = in.tellg();
    while (std::getline(in, first) && trim(first).empty()) start = in.tellg();
    Dataset data;
    if (first.find(',') != std::string::npos) {
        data = load_csv(path, in, first);
        if (num_features && data.num_features() != *num_features)
            throw ParseError(path, 1, "expected " + std::to_string(*num_features) + " feature columns");
    } else {
        in.clear();
        in.seekg(start);
        data = load_sparse(path, in, num_features);
    }
    if (data.size() < 1) throw ParseError(path, 0, "dataset has no rows");
    if (data.has_queries()) query_groups(data);
    return data;
}

void save_dataset_csv(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path);
    out.precision(17);
    for (int a = 0; a < data.num_features(); ++a)
        out << (a < static_cast<int>(data.feature_names.size()) ? data.feature_names[a] : "f" + std::to_string(a))
            << ',';
    if (data.has_queries()) out << "qid,";
    out << "label\n";
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (int a = 0; a < data.num_features(); ++a) out << data.features(i, a) << ',';
        if (data.has_queries()) out << data.query_ids[i] << ',';
        out << data.labels[i] << '\n';
    }
}

CostSchedule load_costs(const std::string& path, int num_features, const Vector& default_learner_costs) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    CostSchedule schedule;
    schedule.feature_costs = Vector::Constant(num_features, std::nan(""));
    schedule.learner_costs = default_learner_costs;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream is(line);
        std::vector<std::string> cols;
        for (std::string tok; is >> tok;) cols.push_back(tok);
        if (cols.empty()) continue;
        if (cols.size() < 2 || cols.size() > 3)
            throw ParseError(path, lineno, "expected 'feature_index cost [learner_cost]'");
        const long idx = parse_index(cols[0], path, lineno);
        if (idx >= num_features) throw ParseError(path, lineno, "unknown feature index " + cols[0]);
        if (!std::isnan(schedule.feature_costs[idx])) throw ParseError(path, lineno, "duplicate feature index " + cols[0]);
        const double c = parse_number(cols[1], path, lineno);
        if (!(c > 0.0)) throw ParseError(path, lineno, "feature cost must be > 0");
        schedule.feature_costs[idx] = c;
        if (cols.size() == 3) {
            if (idx >= schedule.learner_costs.size())
                throw ParseError(path, lineno, "no weak learner with index " + cols[0]);
            const double e = parse_number(cols[2], path, lineno);
            if (e < 0.0) throw ParseError(path, lineno, "learner cost must be >= 0");
            schedule.learner_costs[idx] = e;
        }
    }
    for (int a = 0; a < num_features; ++a)
        if (std::isnan(schedule.feature_costs[a]))
            throw ParseError(path, 0, "cost file has no entry for feature " + std::to_string(a));
    return schedule;
}

void save_costs(const std::string& path, const Vector& feature_costs) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path);
    out.precision(17);
    out << "# feature_index cost\n";
    for (Eigen::Index a = 0; a < feature_costs.size(); ++a) out << a << ' ' << feature_costs[a] << '\n';
}

}  // namespace cstc
