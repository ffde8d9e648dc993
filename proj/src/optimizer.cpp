#include "cstc/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "cstc/error.hpp"

namespace cstc {

void OptimizerConfig::validate() const {
    if (sweeps < 0) throw InvalidInput("sweeps must be >= 0");
    if (cg_iters < 1) throw InvalidInput("cg_iters must be >= 1");
    if (alternations < 1) throw InvalidInput("alternations must be >= 1");
    if (!(tol > 0.0 && tol < 1.0)) throw InvalidInput("tol must lie in (0, 1)");
    if (!(initial_aux > 0.0)) throw InvalidInput("initial_aux must be > 0");
}

Vector aux_closed_form(const Vector& g, double epsilon_aux) {
    return g.cwiseMax(0.0).cwiseSqrt().cwiseMax(epsilon_aux);
}

AuxiliaryVars aux_closed_form(const AuxiliaryVars& g, double epsilon_aux) {
    auto solve = [epsilon_aux](const Matrix& m) -> Matrix { return m.cwiseMax(0.0).cwiseSqrt().cwiseMax(epsilon_aux); };
    return AuxiliaryVars{solve(g.eval), solve(g.feature), solve(g.l1)};
}

AuxiliaryVars synced_aux(const CstcTree& tree, const Matrix& usage, double epsilon_aux) {
    return aux_closed_form(squared_group_norms(tree, usage), epsilon_aux);
}

namespace {

using Clock = std::chrono::steady_clock;

[[noreturn]] void numerical_failure(const char* what, int node, double loss, const Vector& x) {
    std::ostringstream os;
    os << what << " at node " << node << ": loss=" << loss << " |beta|_inf="
       << (x.size() > 1 ? x.head(x.size() - 1).cwiseAbs().maxCoeff() : 0.0) << " theta=" << x[x.size() - 1]
       << " finite_params=" << (x.allFinite() ? "yes" : "no");
    throw NumericalError(os.str());
}

}  // namespace

CgOutcome minimize_cg(const ValueGradient& f, Vector& x, const Vector& precond, int max_iters, double rel_tol,
                      const StepCallback& on_step) {
    Vector g;
    double fx = f(x, g);
    if (!std::isfinite(fx) || !g.allFinite()) return CgOutcome{fx, g.norm(), 0, false};
    Vector z = g.cwiseQuotient(precond);
    double rz = g.dot(z);
    Vector d = -z;
    Vector x_new, g_new;
    int steps = 0;

    for (int it = 0; it < max_iters; ++it) {
        double slope = g.dot(d);
        if (!(slope < 0.0)) {
            d = -z;
            slope = -rz;
        }
        if (!(slope < 0.0)) break;

        double step = 1.0;
        double f_new = fx;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
            x_new = x + step * d;
            f_new = f(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope && g_new.allFinite()) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;

        const Vector z_new = g_new.cwiseQuotient(precond);
        const double pr = std::max(0.0, z_new.dot(g_new - g) / rz);
        d = -z_new + pr * d;
        const double decrease = fx - f_new;
        x.swap(x_new);
        g.swap(g_new);
        z = z_new;
        rz = g.dot(z);
        fx = f_new;
        ++steps;
        if (on_step && !on_step(x, fx)) break;
        if (decrease <= rel_tol * std::max(std::abs(fx), 1e-300) || !(rz > 0.0)) break;
    }
    return CgOutcome{fx, g.norm(), steps, true};
}

namespace {

CgOutcome node_cg(NodeObjective& obj, int node, Vector& x, const OptimizerConfig& opt) {
    const Eigen::Index T = x.size() - 1;
    Vector gb;
    double gt = 0.0;
    const ValueGradient f = [&](const Vector& at, Vector& grad) {
        const double v = obj.evaluate(at.head(T), at[T], &gb, &gt);
        grad.resize(T + 1);
        grad.head(T) = gb;
        grad[T] = gt;
        return v;
    };
    Vector g;
    const double f0 = f(x, g);
    if (!std::isfinite(f0) || !g.allFinite()) numerical_failure("non-finite loss or gradient", node, f0, x);
    const CgOutcome out = minimize_cg(f, x, obj.diagonal_curvature(), opt.cg_iters, 1e-3 * opt.tol);
    if (!out.finite) numerical_failure("non-finite loss or gradient", node, out.loss, x);
    return out;
}

}  // namespace

NodeUpdate optimize_node(CstcTree& tree, int k, const LossContext& ctx, AuxiliaryVars& aux,
                         const OptimizerConfig& opt) {
    const auto start = Clock::now();
    const int T = tree.num_learners();
    NodeUpdate out;
    out.node = k;

    Vector x(T + 1);
    x.head(T) = tree.node(k).beta;
    x[T] = tree.node(k).theta;

    double current = substituted_loss(tree, ctx, aux);
    if (!std::isfinite(current)) numerical_failure("non-finite loss", k, current, x);
    out.loss_before = current;
    out.trace.push_back(current);

    for (int round = 0; round < opt.alternations; ++round) {
        NodeObjective obj(tree, k, ctx, aux);
        const CgOutcome cg = node_cg(obj, k, x, opt);
        out.grad_norm = cg.grad_norm;
        out.trace.push_back(cg.loss);
        tree.node(k).beta = x.head(T);
        tree.node(k).theta = x[T];

        aux = synced_aux(tree, ctx.usage, ctx.cfg.epsilon_aux);
        const double refreshed = substituted_loss(tree, ctx, aux);
        if (!std::isfinite(refreshed)) numerical_failure("non-finite loss after auxiliary refresh", k, refreshed, x);
        out.trace.push_back(refreshed);
        const double decrease = current - refreshed;
        current = refreshed;
        if (decrease <= opt.tol * std::max(std::abs(current), 1e-300)) break;
    }
    out.loss_after = current;
    out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return out;
}

std::vector<TrainLogEntry> initialize_tree(CstcTree& tree, const LossContext& ctx, const OptimizerConfig& opt) {
    std::vector<TrainLogEntry> log;
    for (int k = 0; k < tree.num_nodes(); ++k) {
        std::vector<int> mapping;
        CstcTree leaf_problem = tree.cut_below(k, &mapping);
        const int kk = mapping[k];
        AuxiliaryVars aux = synced_aux(leaf_problem, ctx.usage, ctx.cfg.epsilon_aux);
        // terms touching node k start away from the floor so zero weights can grow
        for (int l : leaf_problem.subtree_terminals(kk)) {
            aux.eval.row(l) = aux.eval.row(l).cwiseMax(opt.initial_aux);
            aux.feature.row(l) = aux.feature.row(l).cwiseMax(opt.initial_aux);
        }
        aux.l1.row(kk) = aux.l1.row(kk).cwiseMax(opt.initial_aux);

        NodeUpdate update = optimize_node(leaf_problem, kk, ctx, aux, opt);
        tree.node(k).beta = leaf_problem.node(kk).beta;
        tree.node(k).theta = leaf_problem.node(kk).theta;
        update.node = k;
        log.push_back(TrainLogEntry{"init", 0, std::move(update)});
    }
    return log;
}

TrainResult train(CstcTree shape, const LossContext& ctx, const OptimizerConfig& opt) {
    opt.validate();
    ctx.cfg.validate();
    ctx.schedule.validate(static_cast<int>(ctx.usage.rows()), shape.num_learners());
    if (ctx.phi.rows() < 1) throw InvalidInput("train: empty training set");
    if (!ctx.phi.allFinite() || !ctx.labels.allFinite()) throw InvalidInput("train: non-finite training data");

    TrainResult result{std::move(shape), {}, {}, 0, false};
    CstcTree& tree = result.tree;
    result.log = initialize_tree(tree, ctx, opt);

    AuxiliaryVars aux = synced_aux(tree, ctx.usage, ctx.cfg.epsilon_aux);
    double previous = substituted_loss(tree, ctx, aux);
    result.sweep_trace.push_back(previous);
    for (int sweep = 1; sweep <= opt.sweeps; ++sweep) {
        for (int k = 0; k < tree.num_nodes(); ++k) {
            NodeUpdate update = optimize_node(tree, k, ctx, aux, opt);
            result.sweep_trace.insert(result.sweep_trace.end(), update.trace.begin() + 1, update.trace.end());
            result.log.push_back(TrainLogEntry{"sweep", sweep, std::move(update)});
        }
        result.sweeps_run = sweep;
        const double now = result.sweep_trace.back();
        const double decrease = previous - now;
        previous = now;
        if (decrease <= opt.tol * std::max(std::abs(now), 1e-300)) {
            result.converged = true;
            break;
        }
    }

    for (int k = 0; k < tree.num_nodes(); ++k)
        for (auto& w : tree.node(k).beta)
            if (!is_active(w)) w = 0.0;
    return result;
}

std::string format_train_log(const std::vector<TrainLogEntry>& log) {
    std::string out;
    for (const auto& e : log) {
        nlohmann::json j = {{"phase", e.phase},
                            {"sweep", e.sweep},
                            {"node", e.update.node},
                            {"loss_before", e.update.loss_before},
                            {"loss_after", e.update.loss_after},
                            {"grad_norm", e.update.grad_norm},
                            {"wall_seconds", e.update.seconds}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace cstc
