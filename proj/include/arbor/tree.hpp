// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/common.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace arbor {

enum class BlockState { Open, Closed, PartiallyEvicted, FullyRetained };

std::string_view to_string(BlockState state);

/// One node of the reasoning tree: a contiguous span of the global token stream.
struct ThoughtBlock {
    NodeId id = kNoNode;
    NodeId parent = kNoNode;
    TokenPos span_start = 0;
    /// Inclusive. While the block is Open this is the last appended position
    /// (span_start - 1 when nothing was appended yet).
    TokenPos span_end = -1;
    int depth = 0;
    BlockState state = BlockState::Open;

    // MSVE inputs and outputs. Populated by the controller.
    std::optional<double> search_value;
    std::optional<double> uncertainty;
    double attention_agg = 0.0;
    double score = 0.0;
    /// Retained-token target k_i. Equals n() until a policy lowers it.
    std::int64_t keep_count = 0;

    std::int64_t n() const noexcept { return span_end - span_start + 1; }
    bool is_open() const noexcept { return state == BlockState::Open; }
    bool contains(TokenPos pos) const noexcept { return pos >= span_start && pos <= span_end; }
};

/// Active leaf, its root-to-leaf chain, and the distance of every node to it.
struct TreeGeometry {
    NodeId active_leaf = kNoNode;
    std::vector<NodeId> path_star;
    std::vector<int> distances;
    std::vector<bool> on_path;

    bool contains(NodeId id) const {
        return id >= 0 && static_cast<std::size_t>(id) < on_path.size() && on_path[id];
    }
};

/// Rooted thought tree over one global token stream.
///
/// Blocks are appended in generation order; a child's span always starts
/// after every span that already exists, so spans along any root-to-leaf
/// path partition a prefix of the stream restricted to that path.
class ThoughtTree {
public:
    /// Appends a new Open block. `parent` must be on the current active path
    /// (or the tree must be empty for the root). `span_start` must be the next
    /// unused stream position.
    NodeId add_block(std::optional<NodeId> parent, TokenPos span_start);

    /// Extends the Open block by one token and returns its position.
    TokenPos append_token(NodeId id);

    void close_block(NodeId id, TokenPos span_end);

    const TreeGeometry& set_active_leaf(NodeId new_leaf);

    int tree_distance(NodeId i, NodeId j) const;

    const TreeGeometry& geometry() const noexcept { return geometry_; }
    const ThoughtBlock& block(NodeId id) const;
    ThoughtBlock& block(NodeId id);
    const std::vector<ThoughtBlock>& blocks() const noexcept { return blocks_; }
    const std::vector<NodeId>& children(NodeId id) const;

    std::size_t size() const noexcept { return blocks_.size(); }
    bool empty() const noexcept { return blocks_.empty(); }
    bool contains(NodeId id) const noexcept {
        return id >= 0 && static_cast<std::size_t>(id) < blocks_.size();
    }
    NodeId open_block() const noexcept { return open_block_; }
    TokenPos next_position() const noexcept { return next_pos_; }
    /// Σ n_i over all blocks; never decreases.
    std::int64_t total_tokens() const noexcept { return next_pos_; }

    /// Which block owns a stream position (kNoNode if none yet).
    NodeId owner_of(TokenPos pos) const;

private:
    void check_node(NodeId id, const char* what) const;

    std::vector<ThoughtBlock> blocks_;
    std::vector<std::vector<NodeId>> children_;
    TreeGeometry geometry_;
    NodeId open_block_ = kNoNode;
    TokenPos next_pos_ = 0;
};

} // namespace arbor
