#include "cstc/model.hpp"

#include <algorithm>
#include <deque>
#include <string>

#include "cstc/error.hpp"

namespace cstc {

CstcTree CstcTree::full(int depth, int num_learners) {
    if (depth < 1) throw InvalidInput("tree depth must be >= 1");
    if (depth > 20) throw InvalidInput("tree depth above 20 is not supported");
    return capped(depth, (1 << depth) - 1, num_learners);
}

CstcTree CstcTree::capped(int depth, int max_nodes, int num_learners) {
    if (depth < 1) throw InvalidInput("tree depth must be >= 1");
    if (depth > 20) throw InvalidInput("tree depth above 20 is not supported");
    if (max_nodes < 1) throw InvalidInput("node cap must be >= 1");
    if (num_learners < 1) throw InvalidInput("number of weak learners must be >= 1");

    const int count = std::min(max_nodes, (1 << depth) - 1);
    CstcTree tree;
    tree.num_learners_ = num_learners;
    tree.nodes_.resize(count);
    for (int k = 0; k < count; ++k) {
        ClassifierNode& node = tree.nodes_[k];
        node.beta = Vector::Zero(num_learners);
        node.parent = k == 0 ? -1 : (k - 1) / 2;
        node.depth = k == 0 ? 1 : tree.nodes_[node.parent].depth + 1;
        const int up = 2 * k + 1, low = 2 * k + 2;
        node.upper = up < count ? ChildRef{ChildRef::Kind::classifier, up} : ChildRef{};
        node.lower = low < count ? ChildRef{ChildRef::Kind::classifier, low} : ChildRef{};
    }
    tree.link_terminals();
    return tree;
}

void CstcTree::link_terminals() {
    terminals_.clear();
    for (int k = 0; k < num_nodes(); ++k) {
        for (bool upper : {true, false}) {
            ChildRef& c = upper ? nodes_[k].upper : nodes_[k].lower;
            if (!c.is_terminal()) continue;
            c.index = static_cast<int>(terminals_.size());
            terminals_.push_back(Terminal{k, upper});
        }
    }
}

int CstcTree::depth() const {
    int d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.depth);
    return d;
}

std::vector<int> CstcTree::ancestry(int k) const {
    if (k < 0 || k >= num_nodes()) throw InvalidInput("unknown classifier node " + std::to_string(k));
    std::vector<int> out;
    for (int at = k; at >= 0; at = nodes_[at].parent) out.push_back(at);
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<int> CstcTree::path(int terminal) const {
    if (terminal < 0 || terminal >= num_terminals())
        throw InvalidInput("unknown terminal element " + std::to_string(terminal));
    return ancestry(terminals_[terminal].parent);
}

std::vector<int> CstcTree::subtree_nodes(int k) const {
    std::vector<int> out{k};
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& n = nodes_.at(out[i]);
        for (const ChildRef& c : {n.upper, n.lower})
            if (!c.is_terminal()) out.push_back(c.index);
    }
    return out;
}

std::vector<int> CstcTree::subtree_terminals(int k) const {
    std::vector<int> out;
    for (int j : subtree_nodes(k))
        for (const ChildRef& c : {nodes_[j].upper, nodes_[j].lower})
            if (c.is_terminal()) out.push_back(c.index);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> CstcTree::predictive_nodes() const {
    std::vector<int> out;
    for (int k = 0; k < num_nodes(); ++k)
        if (nodes_[k].is_predictive()) out.push_back(k);
    return out;
}

CstcTree CstcTree::rebuild(const std::vector<char>& keep, std::vector<int>* old_to_new) const {
    std::vector<int> mapping(nodes_.size(), -1);
    std::vector<int> order;
    std::deque<int> queue{0};
    while (!queue.empty()) {
        const int k = queue.front();
        queue.pop_front();
        mapping[k] = static_cast<int>(order.size());
        order.push_back(k);
        for (const ChildRef& c : {nodes_[k].upper, nodes_[k].lower})
            if (!c.is_terminal() && keep[c.index]) queue.push_back(c.index);
    }

    CstcTree out;
    out.num_learners_ = num_learners_;
    out.nodes_.reserve(order.size());
    for (int old : order) {
        ClassifierNode n = nodes_[old];
        n.parent = n.parent < 0 ? -1 : mapping[n.parent];
        for (ChildRef* c : {&n.upper, &n.lower}) {
            if (!c->is_terminal() && mapping[c->index] >= 0)
                c->index = mapping[c->index];
            else
                *c = ChildRef{};
        }
        out.nodes_.push_back(std::move(n));
    }
    out.link_terminals();
    if (old_to_new) *old_to_new = std::move(mapping);
    return out;
}

CstcTree CstcTree::collapse(int k, std::vector<int>* old_to_new) const {
    if (k <= 0 || k >= num_nodes()) throw InvalidInput("collapse: node " + std::to_string(k) + " cannot be removed");
    std::vector<char> keep(nodes_.size(), 1);
    for (int j : subtree_nodes(k)) keep[j] = 0;
    return rebuild(keep, old_to_new);
}

CstcTree CstcTree::cut_below(int k, std::vector<int>* old_to_new) const {
    std::vector<char> keep(nodes_.size(), 1);
    for (int j : subtree_nodes(k))
        if (j != k) keep[j] = 0;
    return rebuild(keep, old_to_new);
}

void CstcTree::validate() const {
    if (nodes_.empty()) throw InvalidInput("tree has no classifier nodes");
    if (nodes_[0].parent != -1) throw InvalidInput("root must not have a parent");
    std::vector<int> seen(nodes_.size(), 0);
    for (int k = 0; k < num_nodes(); ++k) {
        const auto& n = nodes_[k];
        if (n.beta.size() != num_learners_) throw InvalidInput("node weight vector has wrong length");
        if (n.tuned_beta && n.tuned_beta->size() != num_learners_)
            throw InvalidInput("fine-tuned weight vector has wrong length");
        if (k > 0) {
            if (n.parent < 0 || n.parent >= k) throw InvalidInput("node parent must precede it in breadth-first order");
            if (n.depth != nodes_[n.parent].depth + 1) throw InvalidInput("inconsistent node depth");
        } else if (n.depth != 1) {
            throw InvalidInput("root depth must be 1");
        }
        for (const ChildRef& c : {n.upper, n.lower}) {
            if (c.is_terminal()) {
                if (c.index < 0 || c.index >= num_terminals() || terminals_[c.index].parent != k)
                    throw InvalidInput("terminal link is inconsistent");
                continue;
            }
            if (c.index <= k || c.index >= num_nodes() || nodes_[c.index].parent != k)
                throw InvalidInput("child link is inconsistent");
            ++seen[c.index];
        }
    }
    for (int k = 1; k < num_nodes(); ++k)
        if (seen[k] != 1) throw InvalidInput("every non-root node needs exactly one parent");
}

CstcTree CstcTree::from_parts(int num_learners, std::vector<ClassifierNode> nodes) {
    if (num_learners < 1) throw InvalidInput("number of weak learners must be >= 1");
    CstcTree tree;
    tree.num_learners_ = num_learners;
    tree.nodes_ = std::move(nodes);
    for (auto& n : tree.nodes_)
        for (ChildRef* c : {&n.upper, &n.lower})
            if (c->is_terminal()) c->index = -1;
    tree.link_terminals();
    tree.validate();
    return tree;
}

CstcTree build_full_tree(int depth, int num_learners) { return CstcTree::full(depth, num_learners); }

std::vector<int> path_nodes(const CstcTree& tree, int terminal) { return tree.path(terminal); }

}  // namespace cstc
