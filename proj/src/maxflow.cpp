#include "caric/maxflow.hpp"

#include "caric/error.hpp"

#include <algorithm>
#include <deque>

namespace caric {

MaxFlow::MaxFlow(int nodes) : nodes_(static_cast<std::size_t>(nodes)) {}

void MaxFlow::add_terminal(int node, double source_cap, double sink_cap)
{
    if (source_cap < 0.0 || sink_cap < 0.0)
        throw Error(ErrorCode::InvalidArgument, "terminal capacities must be non-negative");
    // Only the difference matters for the cut; the common part is flow that
    // goes straight through the node.
    flow_ += std::min(source_cap, sink_cap);
    nodes_[static_cast<std::size_t>(node)].tr_cap += source_cap - sink_cap;
}

void MaxFlow::add_edge(int a, int b, double cap, double rev_cap)
{
    if (cap < 0.0 || rev_cap < 0.0)
        throw Error(ErrorCode::InvalidArgument, "edge capacities must be non-negative");
    if (a == b)
        return;
    const int id = static_cast<int>(arcs_.size());
    arcs_.push_back({b, nodes_[static_cast<std::size_t>(a)].first, cap});
    nodes_[static_cast<std::size_t>(a)].first = id;
    arcs_.push_back({a, nodes_[static_cast<std::size_t>(b)].first, rev_cap});
    nodes_[static_cast<std::size_t>(b)].first = id + 1;
}

bool MaxFlow::rooted(int node) const
{
    int x = node;
    while (nodes_[static_cast<std::size_t>(x)].parent >= 0)
        x = arcs_[static_cast<std::size_t>(nodes_[static_cast<std::size_t>(x)].parent)].head;
    return nodes_[static_cast<std::size_t>(x)].parent == kTerminal;
}

void MaxFlow::augment(int bridge)
{
    auto node = [&](int i) -> Node& { return nodes_[static_cast<std::size_t>(i)]; };
    auto arc = [&](int i) -> Arc& { return arcs_[static_cast<std::size_t>(i)]; };

    const int s_start = arc(bridge ^ 1).head;
    const int t_start = arc(bridge).head;
    double f = arc(bridge).cap;
    for (int x = s_start;;) {
        const int pa = node(x).parent;
        if (pa == kTerminal) {
            f = std::min(f, node(x).tr_cap);
            break;
        }
        f = std::min(f, arc(pa ^ 1).cap);
        x = arc(pa).head;
    }
    for (int y = t_start;;) {
        const int pa = node(y).parent;
        if (pa == kTerminal) {
            f = std::min(f, -node(y).tr_cap);
            break;
        }
        f = std::min(f, arc(pa).cap);
        y = arc(pa).head;
    }

    std::vector<int> orphans;
    arc(bridge).cap -= f;
    arc(bridge ^ 1).cap += f;
    for (int x = s_start;;) {
        const int pa = node(x).parent;
        if (pa == kTerminal) {
            node(x).tr_cap -= f;
            if (node(x).tr_cap <= 0.0) {
                node(x).tr_cap = 0.0;
                node(x).parent = kNone;
                orphans.push_back(x);
            }
            break;
        }
        const int up = arc(pa).head;
        arc(pa ^ 1).cap -= f;
        arc(pa).cap += f;
        if (arc(pa ^ 1).cap <= 0.0) {
            arc(pa ^ 1).cap = 0.0;
            node(x).parent = kNone;
            orphans.push_back(x);
        }
        x = up;
    }
    for (int y = t_start;;) {
        const int pa = node(y).parent;
        if (pa == kTerminal) {
            node(y).tr_cap += f;
            if (node(y).tr_cap >= 0.0) {
                node(y).tr_cap = 0.0;
                node(y).parent = kNone;
                orphans.push_back(y);
            }
            break;
        }
        const int up = arc(pa).head;
        arc(pa).cap -= f;
        arc(pa ^ 1).cap += f;
        if (arc(pa).cap <= 0.0) {
            arc(pa).cap = 0.0;
            node(y).parent = kNone;
            orphans.push_back(y);
        }
        y = up;
    }
    flow_ += f;

    while (!orphans.empty()) {
        const int p = orphans.back();
        orphans.pop_back();
        adopt(p, orphans);
    }
}

void MaxFlow::adopt(int p, std::vector<int>& orphans)
{
    Node& np = nodes_[static_cast<std::size_t>(p)];
    const int tree = np.tree;
    auto residual_in = [&](int a) {
        // Capacity usable along the tree edge between p and head(a).
        return tree == 1 ? arcs_[static_cast<std::size_t>(a ^ 1)].cap : arcs_[static_cast<std::size_t>(a)].cap;
    };
    for (int a = np.first; a >= 0; a = arcs_[static_cast<std::size_t>(a)].next) {
        const int q = arcs_[static_cast<std::size_t>(a)].head;
        if (nodes_[static_cast<std::size_t>(q)].tree == tree && residual_in(a) > 0.0 && rooted(q)) {
            np.parent = a;
            return;
        }
    }
    for (int a = np.first; a >= 0; a = arcs_[static_cast<std::size_t>(a)].next) {
        const int q = arcs_[static_cast<std::size_t>(a)].head;
        Node& nq = nodes_[static_cast<std::size_t>(q)];
        if (nq.tree != tree)
            continue;
        if (residual_in(a) > 0.0 && !nq.active) {
            nq.active = true;
            active_.push_back(q);
        }
        if (nq.parent >= 0 && arcs_[static_cast<std::size_t>(nq.parent)].head == p) {
            nq.parent = kNone;
            orphans.push_back(q);
        }
    }
    np.tree = 0;
}

double MaxFlow::solve()
{
    if (solved_)
        throw Error(ErrorCode::InvalidArgument, "max-flow graph already solved");
    solved_ = true;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        Node& n = nodes_[i];
        if (n.tr_cap != 0.0) {
            n.tree = n.tr_cap > 0.0 ? 1 : 2;
            n.parent = kTerminal;
            n.active = true;
            active_.push_back(static_cast<int>(i));
        }
    }
    std::size_t head = 0;
    while (head < active_.size()) {
        const int p = active_[head];
        Node& np = nodes_[static_cast<std::size_t>(p)];
        if (np.tree == 0) {
            np.active = false;
            ++head;
            continue;
        }
        int bridge = -1;
        for (int a = np.first; a >= 0; a = arcs_[static_cast<std::size_t>(a)].next) {
            const int q = arcs_[static_cast<std::size_t>(a)].head;
            Node& nq = nodes_[static_cast<std::size_t>(q)];
            if (np.tree == 1) {
                if (arcs_[static_cast<std::size_t>(a)].cap <= 0.0)
                    continue;
                if (nq.tree == 0) {
                    nq.tree = 1;
                    nq.parent = a ^ 1;
                    if (!nq.active) {
                        nq.active = true;
                        active_.push_back(q);
                    }
                } else if (nq.tree == 2) {
                    bridge = a;
                    break;
                }
            } else {
                if (arcs_[static_cast<std::size_t>(a ^ 1)].cap <= 0.0)
                    continue;
                if (nq.tree == 0) {
                    nq.tree = 2;
                    nq.parent = a ^ 1;
                    if (!nq.active) {
                        nq.active = true;
                        active_.push_back(q);
                    }
                } else if (nq.tree == 1) {
                    bridge = a ^ 1;
                    break;
                }
            }
        }
        if (bridge < 0) {
            np.active = false;
            ++head;
            continue;
        }
        augment(bridge);
        // Keep p at the front: it may still touch the other tree.
        if (head > 4096 && head * 2 > active_.size()) {
            active_.erase(active_.begin(), active_.begin() + static_cast<std::ptrdiff_t>(head));
            head = 0;
        }
    }
    return flow_;
}

bool MaxFlow::source_side(int node) const
{
    return nodes_[static_cast<std::size_t>(node)].tree == 1;
}

} // namespace caric
