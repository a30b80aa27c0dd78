// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/tree.hpp"

#include <algorithm>
#include <string>

namespace arbor {

std::string_view to_string(BlockState state) {
    switch (state) {
    case BlockState::Open: return "Open";
    case BlockState::Closed: return "Closed";
    case BlockState::PartiallyEvicted: return "PartiallyEvicted";
    case BlockState::FullyRetained: return "FullyRetained";
    }
    return "?";
}

void ThoughtTree::check_node(NodeId id, const char* what) const {
    if (!contains(id)) {
        throw Error(std::string("arbor: unknown node ") + std::to_string(id) + " in " + what);
    }
}

NodeId ThoughtTree::add_block(std::optional<NodeId> parent, TokenPos span_start) {
    ARBOR_CHECK(open_block_ == kNoNode, "add_block while another block is still open");
    if (span_start != next_pos_) {
        throw Error("arbor: overlapping or non-contiguous span start " + std::to_string(span_start) +
                    " (expected " + std::to_string(next_pos_) + ")");
    }

    ThoughtBlock b;
    b.id = static_cast<NodeId>(blocks_.size());
    b.span_start = span_start;
    b.span_end = span_start - 1;

    if (parent) {
        check_node(*parent, "add_block");
        ARBOR_CHECK(blocks_[*parent].state != BlockState::Open, "parent block is still open");
        ARBOR_CHECK(geometry_.contains(*parent), "parent is not on the active path");
        b.parent = *parent;
        b.depth = blocks_[*parent].depth + 1;
    } else {
        ARBOR_CHECK(blocks_.empty(), "tree already has a root");
    }

    blocks_.push_back(b);
    children_.emplace_back();
    if (parent) children_[*parent].push_back(b.id);
    open_block_ = b.id;
    return b.id;
}

TokenPos ThoughtTree::append_token(NodeId id) {
    check_node(id, "append_token");
    ARBOR_CHECK(id == open_block_, "tokens may only be appended to the open block");
    auto& b = blocks_[id];
    ++b.span_end;
    next_pos_ = b.span_end + 1;
    return b.span_end;
}

void ThoughtTree::close_block(NodeId id, TokenPos span_end) {
    check_node(id, "close_block");
    auto& b = blocks_[id];
    ARBOR_CHECK(b.state == BlockState::Open, "closing a block that is not open");
    ARBOR_CHECK(span_end >= b.span_start, "span_end precedes span_start");
    ARBOR_CHECK(span_end >= b.span_end, "span_end precedes already appended tokens");
    b.span_end = span_end;
    b.state = BlockState::Closed;
    b.keep_count = b.n();
    next_pos_ = span_end + 1;
    open_block_ = kNoNode;
}

const TreeGeometry& ThoughtTree::set_active_leaf(NodeId new_leaf) {
    check_node(new_leaf, "set_active_leaf");
    const auto count = blocks_.size();
    TreeGeometry g;
    g.active_leaf = new_leaf;
    g.on_path.assign(count, false);
    g.distances.assign(count, 0);

    for (NodeId cur = new_leaf; cur != kNoNode; cur = blocks_[cur].parent) {
        g.on_path[cur] = true;
        g.path_star.push_back(cur);
    }
    std::reverse(g.path_star.begin(), g.path_star.end());

    // Parents precede children in id order, so the depth of the deepest
    // on-path ancestor propagates in one forward sweep.
    const int leaf_depth = blocks_[new_leaf].depth;
    std::vector<int> lca_depth(count, 0);
    for (std::size_t j = 0; j < count; ++j) {
        const auto& b = blocks_[j];
        lca_depth[j] = g.on_path[j] ? b.depth : lca_depth[b.parent];
        g.distances[j] = b.depth + leaf_depth - 2 * lca_depth[j];
    }

    geometry_ = std::move(g);
    return geometry_;
}

int ThoughtTree::tree_distance(NodeId i, NodeId j) const {
    check_node(i, "tree_distance");
    check_node(j, "tree_distance");
    int dist = 0;
    while (blocks_[i].depth > blocks_[j].depth) { i = blocks_[i].parent; ++dist; }
    while (blocks_[j].depth > blocks_[i].depth) { j = blocks_[j].parent; ++dist; }
    while (i != j) {
        i = blocks_[i].parent;
        j = blocks_[j].parent;
        dist += 2;
    }
    return dist;
}

const ThoughtBlock& ThoughtTree::block(NodeId id) const {
    check_node(id, "block");
    return blocks_[id];
}

ThoughtBlock& ThoughtTree::block(NodeId id) {
    check_node(id, "block");
    return blocks_[id];
}

const std::vector<NodeId>& ThoughtTree::children(NodeId id) const {
    check_node(id, "children");
    return children_[id];
}

NodeId ThoughtTree::owner_of(TokenPos pos) const {
    if (pos < 0 || pos >= next_pos_) return kNoNode;
    // Spans are appended in increasing stream order.
    auto it = std::upper_bound(blocks_.begin(), blocks_.end(), pos,
                               [](TokenPos p, const ThoughtBlock& b) { return p < b.span_start; });
    if (it == blocks_.begin()) return kNoNode;
    --it;
    return it->contains(pos) ? it->id : kNoNode;
}

} // namespace arbor
