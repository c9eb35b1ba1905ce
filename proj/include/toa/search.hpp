// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <toa/compute.hpp>
#include <toa/core.hpp>
#include <toa/params.hpp>
#include <toa/pool.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace toa
{

using NodeId = std::size_t;

enum class NodeKind
{
    root,
    model,
    response,
};

[[nodiscard]] std::string_view to_string(NodeKind k) noexcept;

struct Node
{
    NodeId node_id = 0;
    NodeKind kind = NodeKind::root;
    /// Model nodes: the agent that generates under this node.
    std::optional<std::string> agent_id;
    /// Response nodes: the sample held by this node.
    std::optional<std::size_t> sample_index;
    std::optional<NodeId> parent_id;
    std::vector<NodeId> children_ids;
    /// Cumulative reward and visit count of every simulation through this node.
    double v = 0.0;
    std::uint64_t n = 0;
    /// Model nodes created by response expansion, seeded from the root's children.
    bool inherited_from_root = false;
    /// Response nodes: the reward the sample received.
    std::optional<double> reward;
    /// Response nodes: the sample that was refined, if any.
    std::optional<std::size_t> refined_sample;
    /// Response nodes on the path from the root, this node included.
    std::size_t depth = 0;
};

/// Alternating root -> model -> response -> model ... tree. Node ids are
/// dense and assigned in creation order; nodes are never removed.
class SearchTree
{
  public:
    /// Root plus one model child per agent, in pool order, all at (v, n) = (0, 0).
    explicit SearchTree(std::vector<std::string> agent_ids);

    [[nodiscard]] NodeId root_id() const noexcept { return 0; }
    [[nodiscard]] const Node& node(NodeId id) const { return _nodes.at(id); }
    [[nodiscard]] Node& node(NodeId id) { return _nodes.at(id); }
    [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return _nodes; }
    [[nodiscard]] std::size_t response_count() const noexcept { return _response_count; }
    [[nodiscard]] const std::vector<std::string>& agent_ids() const noexcept { return _agent_ids; }
    [[nodiscard]] NodeId root_child(std::string_view agent_id) const;

    NodeId add_model_node(NodeId parent, std::string agent_id, bool inherited, double v = 0.0, std::uint64_t n = 0);
    NodeId add_response_node(NodeId model_node, std::size_t sample_index, double reward,
                             std::optional<std::size_t> refined_sample);

    /// Node ids from the root down to `id`, both included.
    [[nodiscard]] std::vector<NodeId> path_from_root(NodeId id) const;

  private:
    std::vector<std::string> _agent_ids;
    std::vector<Node> _nodes;
    std::size_t _response_count = 0;
};

/// v/n + alpha * sqrt(2 ln N / n); +infinity for unvisited nodes.
[[nodiscard]] double ucb_score(double v, std::uint64_t n, std::uint64_t N, double alpha) noexcept;

/// A model node's traversal candidates: its `width` best response children
/// by reward, ties to the earlier sample. Pruned children stay in the tree.
[[nodiscard]] std::vector<NodeId> retained_children(const SearchTree& tree, NodeId model_node, std::size_t width);

struct Decision
{
    NodeId parent = 0;
    std::vector<NodeId> candidates;
    NodeId chosen = 0;
};

struct Selection
{
    NodeId model_node = 0;
    std::optional<std::size_t> refine_context;
    /// Root ... model_node.
    std::vector<NodeId> path;
    std::vector<Decision> decisions;
    /// Response node expanded on the way down, if any.
    std::optional<NodeId> expanded_response;
};

/// Walks from the root by UCB until it reaches a model node that can take
/// another response. An unexpanded response node met on the way is expanded
/// in place and the walk continues into its new children. Throws
/// SearchExhausted when no node within the width/depth caps can grow.
[[nodiscard]] Selection select_action(SearchTree& tree, const ToaParams& params);

/// Gives a response node one model child per agent, each starting from the
/// current (v, n) of the root's child for that agent.
std::vector<NodeId> expand_response_node(SearchTree& tree, NodeId response_node, const ToaParams& params);

/// The sample a model node's generation refines, or none for fresh generation.
[[nodiscard]] std::optional<std::size_t> refinement_context(const SearchTree& tree, NodeId model_node,
                                                            const ToaParams& params);

struct ModelExpansion
{
    NodeId response_node = 0;
    double reward = 0.0;
};

/// Generates one response under `model_node`, registers and scores it and
/// hangs it in the tree.
ModelExpansion expand_model_node(SearchTree& tree, NodeId model_node, const AgentPool& pool,
                                 const PromptContext& prompt, SampleSet& samples, BudgetLedger& ledger,
                                 const ToaParams& params);

/// v += r, n += 1 on every node from `response_node` up to the root.
void backpropagate(SearchTree& tree, NodeId response_node, double reward);

struct SimulationStep
{
    /// Root ... new response node: exactly the nodes backpropagation touched.
    std::vector<NodeId> path;
    double reward = 0.0;
    std::vector<Decision> decisions;
    std::optional<NodeId> expanded_response;
    double total_flops = 0.0;
};

struct ToaRun
{
    SampleSet samples;
    SearchTree tree;
    BudgetLedger ledger;
    std::vector<SimulationStep> log;
};

/// SearchExhausted carrying everything produced before the search stalled.
class ToaSearchExhausted: public SearchExhausted
{
  public:
    ToaSearchExhausted(const std::string& message, std::shared_ptr<const ToaRun> partial):
        SearchExhausted(message), _partial(std::move(partial))
    {
    }
    [[nodiscard]] const std::shared_ptr<const ToaRun>& partial() const noexcept { return _partial; }

  private:
    std::shared_ptr<const ToaRun> _partial;
};

/// select -> expand -> simulate -> backpropagate until N responses exist.
[[nodiscard]] ToaRun run_toa(const AgentPool& pool, const PromptContext& prompt, const ToaParams& params);

} // namespace toa
