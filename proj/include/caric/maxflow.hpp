#pragma once

#include <vector>

namespace caric {

/// Max-flow / min-cut on a sparse graph with source and sink terminal links,
/// using the two-search-tree augmenting path scheme (growth, augmentation,
/// adoption of orphans) with tree reuse between augmentations.
class MaxFlow {
public:
    explicit MaxFlow(int nodes);

    int node_count() const { return static_cast<int>(nodes_.size()); }

    /// Capacities from the source to `node` and from `node` to the sink;
    /// repeated calls accumulate.
    void add_terminal(int node, double source_cap, double sink_cap);

    /// Edge with capacity `cap` from a to b and `rev_cap` from b to a.
    void add_edge(int a, int b, double cap, double rev_cap);

    double solve();

    /// After solve(): true for nodes on the source side of the minimum cut
    /// (those still reachable from the source in the residual graph).
    bool source_side(int node) const;

private:
    struct Arc {
        int head;
        int next;
        double cap;
    };
    struct Node {
        int first = -1;
        int parent = -1; // arc to the parent, kTerminal, or kNone
        int tree = 0;    // 0 free, 1 source tree, 2 sink tree
        double tr_cap = 0.0;
        bool active = false;
    };

    static constexpr int kNone = -1;
    static constexpr int kTerminal = -2;

    bool rooted(int node) const;
    void augment(int arc_from_source_side);
    void adopt(int node, std::vector<int>& orphans);

    std::vector<Node> nodes_;
    std::vector<Arc> arcs_;
    std::vector<int> active_;
    double flow_ = 0.0;
    bool solved_ = false;
};

} // namespace caric
