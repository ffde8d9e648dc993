#pragma once

#include <optional>
#include <vector>

#include "cstc/ensemble.hpp"

namespace cstc {

/// Reference from a classifier node to one of its two children.
struct ChildRef {
    enum class Kind { classifier, terminal };
    Kind kind = Kind::terminal;
    int index = -1;

    bool is_terminal() const noexcept { return kind == Kind::terminal; }
    friend bool operator==(const ChildRef&, const ChildRef&) = default;
};

struct ClassifierNode {
    Vector beta;
    double theta = 0.0;
    /// Fine-tuned prediction weights; routing always uses beta.
    std::optional<Vector> tuned_beta;
    int parent = -1;
    ChildRef upper;
    ChildRef lower;
    int depth = 1;  // root has depth 1

    bool is_predictive() const noexcept { return upper.is_terminal() || lower.is_terminal(); }
    /// Weights used when this node emits a final prediction.
    const Vector& prediction_weights() const noexcept { return tuned_beta ? *tuned_beta : beta; }
};

struct Terminal {
    int parent = -1;
    bool is_upper = false;
};

/// Binary tree of classifier nodes with parameter-free terminal elements.
///
/// Nodes and terminals are numbered breadth-first with the upper child
/// before the lower one, so every parent index is smaller than its
/// children's. Structural edits rebuild the numbering.
class CstcTree {
public:
    /// Full balanced tree with 2^depth - 1 classifiers and zero parameters.
    static CstcTree full(int depth, int num_learners);
    /// Breadth-first prefix of the full tree of `depth`, capped at `max_nodes` classifiers.
    static CstcTree capped(int depth, int max_nodes, int num_learners);

    int num_learners() const noexcept { return num_learners_; }
    int num_nodes() const noexcept { return static_cast<int>(nodes_.size()); }
    int num_terminals() const noexcept { return static_cast<int>(terminals_.size()); }
    int depth() const;

    const ClassifierNode& node(int k) const { return nodes_.at(k); }
    ClassifierNode& node(int k) { return nodes_.at(k); }
    const std::vector<ClassifierNode>& nodes() const noexcept { return nodes_; }
    const Terminal& terminal(int l) const { return terminals_.at(l); }
    const std::vector<Terminal>& terminals() const noexcept { return terminals_; }

    /// Classifier nodes from the root to the parent of terminal l, inclusive.
    std::vector<int> path(int terminal) const;
    /// Classifier nodes from the root to k, inclusive.
    std::vector<int> ancestry(int k) const;
    /// k and all classifier nodes below it.
    std::vector<int> subtree_nodes(int k) const;
    /// Terminals below k.
    std::vector<int> subtree_terminals(int k) const;
    std::vector<int> predictive_nodes() const;

    /// Replaces the classifier subtree rooted at k (k != root) with a
    /// terminal of k's parent. Returns the renumbered tree and fills
    /// `old_to_new` (-1 for removed nodes) when given.
    CstcTree collapse(int k, std::vector<int>* old_to_new = nullptr) const;
    /// Removes every descendant of k so that k becomes a leaf classifier.
    CstcTree cut_below(int k, std::vector<int>* old_to_new = nullptr) const;

    /// Throws InvalidInput if any structural invariant fails.
    void validate() const;

    /// Builds a tree from raw parts (used by deserialization) and validates it.
    static CstcTree from_parts(int num_learners, std::vector<ClassifierNode> nodes);

private:
    CstcTree() = default;
    /// Renumbers breadth-first over the nodes for which keep[k] is true.
    /// A dropped child becomes a terminal.
    CstcTree rebuild(const std::vector<char>& keep, std::vector<int>* old_to_new) const;
    void link_terminals();

    int num_learners_ = 0;
    std::vector<ClassifierNode> nodes_;
    std::vector<Terminal> terminals_;
};

CstcTree build_full_tree(int depth, int num_learners);
std::vector<int> path_nodes(const CstcTree& tree, int terminal);

}  // namespace cstc
