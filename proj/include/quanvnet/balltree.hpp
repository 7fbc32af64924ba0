// Nearest-neighbor feature cache: an exact balltree over processed block
// vectors plus the budgeted processing step that decides which blocks are
// evaluated for real and which reuse their nearest processed neighbor's
// output.
//
// Metric is Euclidean. Queries return the globally nearest stored point;
// ties break toward the lowest stored index. The tree is immutable after
// build and safe for concurrent readers.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace quanvnet {

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

class BallTree {
public:
    struct Node {
        std::vector<double> center;
        double radius = 0.0;
        int left = -1;  // child node indices; -1 for leaves
        int right = -1;
        std::size_t begin = 0; // leaf range into point_order()
        std::size_t end = 0;
    };

    struct Nearest {
        std::size_t index = 0;
        double distance = 0.0;
        const std::vector<double>* payload = nullptr;
    };

    struct QueryStats {
        std::size_t nodes_visited = 0;
    };

    BallTree() = default;

    // payloads may be empty (tree over bare points) but otherwise must pair
    // one record per point.
    static BallTree build(std::vector<std::vector<double>> points,
                          std::vector<std::vector<double>> payloads,
                          std::size_t max_leaf_size = 16) {
        if (points.empty())
            throw std::invalid_argument("BallTree::build: need at least one point");
        if (!payloads.empty() && payloads.size() != points.size())
            throw std::invalid_argument("BallTree::build: payload count does not match point count");
        const std::size_t dim = points[0].size();
        for (const auto& p : points)
            if (p.size() != dim)
                throw std::invalid_argument("BallTree::build: ragged point dimensions");
        if (max_leaf_size < 1) max_leaf_size = 1;

        BallTree tree;
        tree.points_ = std::move(points);
        tree.payloads_ = std::move(payloads);
        tree.dim_ = dim;
        tree.leaf_size_ = max_leaf_size;
        tree.order_.resize(tree.points_.size());
        for (std::size_t i = 0; i < tree.order_.size(); ++i) tree.order_[i] = i;
        tree.build_node(0, tree.order_.size());
        return tree;
    }

    Nearest nearest(std::span<const double> query) const {
        QueryStats stats;
        return nearest(query, stats);
    }

    Nearest nearest(std::span<const double> query, QueryStats& stats) const {
        if (query.size() != dim_)
            throw std::invalid_argument("BallTree::nearest: query has dimension " +
                                        std::to_string(query.size()) + ", tree holds " +
                                        std::to_string(dim_));
        Nearest best;
        best.index = std::numeric_limits<std::size_t>::max();
        best.distance = std::numeric_limits<double>::infinity();
        search(0, query, best, stats);
        if (!payloads_.empty()) best.payload = &payloads_[best.index];
        return best;
    }

    std::size_t size() const { return points_.size(); }
    std::size_t dimension() const { return dim_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<std::size_t>& point_order() const { return order_; }
    const std::vector<double>& point(std::size_t i) const { return points_[i]; }
    const std::vector<double>& payload(std::size_t i) const { return payloads_[i]; }
    const std::vector<std::vector<double>>& payloads() const { return payloads_; }

private:
    // Builds the node covering order_[begin, end); returns its index.
    int build_node(std::size_t begin, std::size_t end) {
        Node node;
        node.center.assign(dim_, 0.0);
        for (std::size_t i = begin; i < end; ++i)
            for (std::size_t d = 0; d < dim_; ++d)
                node.center[d] += points_[order_[i]][d];
        const double inv = 1.0 / double(end - begin);
        for (double& c : node.center) c *= inv;
        for (std::size_t i = begin; i < end; ++i)
            node.radius = std::max(node.radius, euclidean_distance(points_[order_[i]], node.center));

        const int self = int(nodes_.size());
        nodes_.push_back(std::move(node));

        if (end - begin <= leaf_size_) {
            nodes_[self].begin = begin;
            nodes_[self].end = end;
            return self;
        }

        // Split on the dimension of maximum spread at the median. Sorting by
        // (coordinate, index) keeps the split independent of the standard
        // library's partition order.
        std::size_t split_dim = 0;
        double best_spread = -1.0;
        for (std::size_t d = 0; d < dim_; ++d) {
            double lo = points_[order_[begin]][d], hi = lo;
            for (std::size_t i = begin + 1; i < end; ++i) {
                const double v = points_[order_[i]][d];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                split_dim = d;
            }
        }
        std::sort(order_.begin() + long(begin), order_.begin() + long(end),
                  [&](std::size_t a, std::size_t b) {
                      const double va = points_[a][split_dim];
                      const double vb = points_[b][split_dim];
                      return va < vb || (va == vb && a < b);
                  });
        const std::size_t mid = begin + (end - begin) / 2;
        const int left = build_node(begin, mid);
        const int right = build_node(mid, end);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    void consider(std::size_t point_index, std::span<const double> query, Nearest& best) const {
        const double d = euclidean_distance(points_[point_index], query);
        if (d < best.distance || (d == best.distance && point_index < best.index)) {
            best.distance = d;
            best.index = point_index;
        }
    }

    void search(int node_index, std::span<const double> query, Nearest& best,
                QueryStats& stats) const {
        const Node& node = nodes_[std::size_t(node_index)];
        ++stats.nodes_visited;
        if (node.left < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i)
                consider(order_[i], query, best);
            return;
        }
        const Node& ln = nodes_[std::size_t(node.left)];
        const Node& rn = nodes_[std::size_t(node.right)];
        const double dl = euclidean_distance(ln.center, query);
        const double dr = euclidean_distance(rn.center, query);
        const int first = dl <= dr ? node.left : node.right;
        const int second = dl <= dr ? node.right : node.left;
        const double first_bound = (dl <= dr ? dl - ln.radius : dr - rn.radius);
        const double second_bound = (dl <= dr ? dr - rn.radius : dl - ln.radius);
        // Prune only on a strictly larger lower bound so equidistant points
        // remain reachable for the index tie-break.
        if (first_bound <= best.distance)
            search(first, query, best, stats);
        if (second_bound <= best.distance)
            search(second, query, best, stats);
    }

    std::vector<std::vector<double>> points_;
    std::vector<std::vector<double>> payloads_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    std::size_t dim_ = 0;
    std::size_t leaf_size_ = 16;
};

struct ComputeBudget {
    std::size_t max_exact_evaluations = 0; // must be >= 1
};

struct BudgetResult {
    std::vector<std::vector<double>> records; // one output record per input block
    BallTree tree;                            // over the evaluated distinct blocks
    std::size_t exact_count = 0;              // evaluator invocations
    std::size_t mapped_count = 0;             // blocks answered by nearest lookup
};

// Spends the budget on the first distinct blocks in input order (exact
// duplicates reuse the duplicate's record without consuming budget), builds
// the tree over what was evaluated, and answers every remaining block by
// nearest-neighbor lookup.
inline BudgetResult process_with_budget(
    const std::vector<std::vector<double>>& blocks,
    const std::function<std::vector<double>(std::size_t)>& evaluate,
    ComputeBudget budget, unsigned threads = 1) {
    if (budget.max_exact_evaluations < 1)
        throw std::invalid_argument("process_with_budget: budget must be >= 1");
    if (blocks.empty())
        throw std::invalid_argument("process_with_budget: no blocks");
    const std::size_t dim = blocks[0].size();
    for (const auto& b : blocks)
        if (b.size() != dim)
            throw std::invalid_argument("process_with_budget: ragged block dimensions");

    BudgetResult result;
    result.records.resize(blocks.size());

    std::map<std::vector<double>, std::size_t> seen; // block -> processed slot
    std::vector<std::size_t> selected;               // block indices to evaluate
    std::vector<long> record_source(blocks.size(), -1); // processed slot, or -1 = needs mapping
    std::vector<std::vector<double>> processed_points;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto it = seen.find(blocks[i]);
        if (it != seen.end()) {
            record_source[i] = long(it->second);
            continue;
        }
        if (selected.size() < budget.max_exact_evaluations) {
            const std::size_t slot = selected.size();
            seen.emplace(blocks[i], slot);
            selected.push_back(i);
            processed_points.push_back(blocks[i]);
            record_source[i] = long(slot);
        }
    }

    std::vector<std::vector<double>> processed_payloads(selected.size());
    const auto run_chunk = [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s)
            processed_payloads[s] = evaluate(selected[s]);
    };
    if (threads <= 1 || selected.size() < 2) {
        run_chunk(0, selected.size());
    } else {
        const std::size_t n = selected.size();
        const std::size_t workers = std::min<std::size_t>(threads, n);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = n * w / workers;
            const std::size_t hi = n * (w + 1) / workers;
            pool.emplace_back(run_chunk, lo, hi);
        }
        for (auto& t : pool) t.join();
    }
    result.exact_count = selected.size();

    result.tree = BallTree::build(std::move(processed_points), processed_payloads);

    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (record_source[i] >= 0) {
            result.records[i] = processed_payloads[std::size_t(record_source[i])];
        } else {
            const auto hit = result.tree.nearest(blocks[i]);
            result.records[i] = *hit.payload;
            ++result.mapped_count;
        }
    }
    return result;
}

} // namespace quanvnet
