// SPDX-License-Identifier: Apache-2.0
#include <toa/search.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace toa
{

std::string_view to_string(NodeKind k) noexcept
{
    switch (k)
    {
        case NodeKind::root: return "root";
        case NodeKind::model: return "model";
        case NodeKind::response: return "response";
    }
    return "unknown";
}

SearchTree::SearchTree(std::vector<std::string> agent_ids): _agent_ids(std::move(agent_ids))
{
    if (_agent_ids.empty())
        throw std::invalid_argument("search tree needs at least one agent");
    _nodes.push_back(Node { .node_id = 0, .kind = NodeKind::root });
    for (const auto& id: _agent_ids)
        add_model_node(root_id(), id, false);
}

NodeId SearchTree::root_child(std::string_view agent_id) const
{
    for (auto child: _nodes.front().children_ids)
        if (_nodes[child].agent_id == agent_id)
            return child;
    throw std::out_of_range("root has no model child for agent '" + std::string { agent_id } + "'");
}

NodeId SearchTree::add_model_node(NodeId parent, std::string agent_id, bool inherited, double v, std::uint64_t n)
{
    if (node(parent).kind == NodeKind::model)
        throw std::logic_error("model nodes hang under the root or a response node");
    const auto id = _nodes.size();
    const auto depth = _nodes[parent].depth;
    _nodes.push_back(Node {
        .node_id = id,
        .kind = NodeKind::model,
        .agent_id = std::move(agent_id),
        .parent_id = parent,
        .v = n == 0 ? 0.0 : v,
        .n = n,
        .inherited_from_root = inherited,
        .depth = depth,
    });
    _nodes[parent].children_ids.push_back(id);
    return id;
}

NodeId SearchTree::add_response_node(NodeId model_node, std::size_t sample_index, double reward,
                                     std::optional<std::size_t> refined_sample)
{
    if (node(model_node).kind != NodeKind::model)
        throw std::logic_error("response nodes hang under model nodes");
    const auto id = _nodes.size();
    const auto depth = _nodes[model_node].depth + 1;
    _nodes.push_back(Node {
        .node_id = id,
        .kind = NodeKind::response,
        .sample_index = sample_index,
        .parent_id = model_node,
        .reward = reward,
        .refined_sample = refined_sample,
        .depth = depth,
    });
    _nodes[model_node].children_ids.push_back(id);
    ++_response_count;
    return id;
}

std::vector<NodeId> SearchTree::path_from_root(NodeId id) const
{
    auto path = std::vector<NodeId> {};
    for (auto cur = std::optional<NodeId> { id }; cur; cur = node(*cur).parent_id)
        path.push_back(*cur);
    std::reverse(path.begin(), path.end());
    return path;
}

double ucb_score(double v, std::uint64_t n, std::uint64_t N, double alpha) noexcept
{
    if (n == 0)
        return std::numeric_limits<double>::infinity();
    const auto visits = static_cast<double>(n);
    return v / visits + alpha * std::sqrt(2.0 * std::log(static_cast<double>(N)) / visits);
}

std::vector<NodeId> retained_children(const SearchTree& tree, NodeId model_node, std::size_t width)
{
    auto kids = tree.node(model_node).children_ids;
    std::sort(kids.begin(), kids.end(), [&](NodeId a, NodeId b) {
        const auto& na = tree.node(a);
        const auto& nb = tree.node(b);
        const auto ra = na.reward.value_or(-std::numeric_limits<double>::infinity());
        const auto rb = nb.reward.value_or(-std::numeric_limits<double>::infinity());
        if (ra != rb)
            return ra > rb;
        return na.sample_index < nb.sample_index;
    });
    if (kids.size() > width)
        kids.resize(width);
    return kids;
}

namespace
{
    bool can_grow(const Node& model, const ToaParams& params)
    {
        return model.children_ids.size() < params.max_width
               && (!params.max_depth || model.depth + 1 <= *params.max_depth);
    }

    /// Whether a subtree still contains a node that can grow, given the
    /// width/depth caps. Without a depth cap every subtree can.
    class Frontier
    {
      public:
        Frontier(const SearchTree& tree, const ToaParams& params): _tree(tree), _params(params) {}

        bool alive(NodeId id)
        {
            if (!_params.max_depth)
                return true;
            if (_memo.size() < _tree.nodes().size())
                _memo.resize(_tree.nodes().size(), Unknown);
            if (_memo[id] == Unknown)
                _memo[id] = compute(id) ? Yes : No;
            return _memo[id] == Yes;
        }

        void invalidate() { _memo.assign(_tree.nodes().size(), Unknown); }

      private:
        enum State : unsigned char
        {
            Unknown,
            Yes,
            No
        };

        bool compute(NodeId id)
        {
            const auto& node = _tree.node(id);
            if (node.kind == NodeKind::model)
            {
                if (can_grow(node, _params))
                    return true;
                const auto kids = retained_children(_tree, id, _params.max_width);
                return std::any_of(kids.begin(), kids.end(), [&](NodeId c) { return alive(c); });
            }
            if (node.kind == NodeKind::response)
            {
                if (node.depth >= *_params.max_depth)
                    return false;
                if (node.children_ids.empty())
                    return true;
            }
            const auto kids = node.children_ids;
            return std::any_of(kids.begin(), kids.end(), [&](NodeId c) { return alive(c); });
        }

        const SearchTree& _tree;
        const ToaParams& _params;
        std::vector<State> _memo;
    };
} // namespace

std::optional<std::size_t> refinement_context(const SearchTree& tree, NodeId model_node, const ToaParams& params)
{
    const auto& model = tree.node(model_node);
    const auto& parent = tree.node(model.parent_id.value());
    if (parent.kind == NodeKind::root)
        return std::nullopt;
    if (model.inherited_from_root && params.root_merge_mode == RootMergeMode::fresh)
        return std::nullopt;
    return parent.sample_index;
}

std::vector<NodeId> expand_response_node(SearchTree& tree, NodeId response_node, const ToaParams&)
{
    const auto& response = tree.node(response_node);
    if (response.kind != NodeKind::response)
        throw std::logic_error("only response nodes can be expanded into model nodes");
    if (!response.children_ids.empty())
        throw AlreadyExpanded("response node " + std::to_string(response_node) + " already has model children");

    auto created = std::vector<NodeId> {};
    for (const auto& agent: tree.agent_ids())
    {
        const auto& source = tree.node(tree.root_child(agent));
        const auto v = source.v;
        const auto n = source.n;
        created.push_back(tree.add_model_node(response_node, agent, true, v, n));
    }
    return created;
}

Selection select_action(SearchTree& tree, const ToaParams& params)
{
    auto frontier = Frontier { tree, params };
    if (!frontier.alive(tree.root_id()))
        throw SearchExhausted("no node within width " + std::to_string(params.max_width) + " and depth "
                              + (params.max_depth ? std::to_string(*params.max_depth) : std::string { "unlimited" })
                              + " can take another response; raise the width");

    auto selection = Selection {};
    auto current = tree.root_id();
    selection.path.push_back(current);

    while (true)
    {
        auto candidates = std::vector<NodeId> {};
        const auto kind = tree.node(current).kind;
        if (kind == NodeKind::model)
        {
            if (can_grow(tree.node(current), params))
            {
                selection.model_node = current;
                selection.refine_context = refinement_context(tree, current, params);
                return selection;
            }
            candidates = retained_children(tree, current, params.max_width);
            std::sort(candidates.begin(), candidates.end());
        }
        else
        {
            if (kind == NodeKind::response && tree.node(current).children_ids.empty())
            {
                expand_response_node(tree, current, params);
                selection.expanded_response = current;
                frontier.invalidate();
            }
            candidates = tree.node(current).children_ids;
        }
        std::erase_if(candidates, [&](NodeId c) { return !frontier.alive(c); });
        if (candidates.empty())
            throw SearchExhausted("selection dead-ended at node " + std::to_string(current));

        const auto& parent = tree.node(current);
        const auto log_base = params.ucb_parent_visits ? std::max<std::uint64_t>(parent.n, 1) : params.N;
        auto best = candidates.front();
        auto best_score = -std::numeric_limits<double>::infinity();
        for (auto c: candidates)
        {
            const auto& child = tree.node(c);
            const auto score = ucb_score(child.v, child.n, log_base, params.alpha);
            if (score > best_score)
            {
                best = c;
                best_score = score;
            }
        }
        selection.decisions.push_back(Decision { current, std::move(candidates), best });
        current = best;
        selection.path.push_back(current);
    }
}

ModelExpansion expand_model_node(SearchTree& tree, NodeId model_node, const AgentPool& pool,
                                 const PromptContext& prompt, SampleSet& samples, BudgetLedger& ledger,
                                 const ToaParams& params)
{
    const auto& model = tree.node(model_node);
    if (model.kind != NodeKind::model)
        throw std::logic_error("only model nodes generate responses");
    if (model.children_ids.size() >= params.max_width)
        throw WidthExceeded("model node " + std::to_string(model_node) + " already has "
                            + std::to_string(model.children_ids.size()) + " responses (width "
                            + std::to_string(params.max_width) + ")");
    if (tree.response_count() >= params.N || samples.full())
        throw BudgetExhausted("search already holds " + std::to_string(tree.response_count()) + " responses");

    const auto context = refinement_context(tree, model_node, params);
    const auto agent = pool.index_of(*model.agent_id);

    auto sample = Sample {};
    if (context)
    {
        const auto prior = std::vector<std::string> { samples.at(*context).text };
        sample = pool.produce(agent, prompt, TemplateMode::refine_one, prior, samples.size(), ledger);
        sample.parent_index = context;
    }
    else
        sample = pool.produce(agent, prompt, TemplateMode::fresh, {}, samples.size(), ledger);

    const auto reward = *sample.reward;
    const auto index = samples.register_sample(std::move(sample));
    const auto response = tree.add_response_node(model_node, index, reward, context);
    return ModelExpansion { response, reward };
}

void backpropagate(SearchTree& tree, NodeId response_node, double reward)
{
    for (auto cur = std::optional<NodeId> { response_node }; cur; cur = tree.node(*cur).parent_id)
    {
        auto& node = tree.node(*cur);
        node.v += reward;
        node.n += 1;
    }
}

ToaRun run_toa(const AgentPool& pool, const PromptContext& prompt, const ToaParams& params)
{
    if (params.N == 0 || params.max_width == 0 || !(params.alpha > 0.0))
        throw ConfigError("strategy_params", "TOA needs N >= 1, max_width >= 1 and alpha > 0");

    auto agent_ids = std::vector<std::string> {};
    for (const auto& a: pool.agents())
        agent_ids.push_back(a.agent_id);

    auto run = ToaRun {
        .samples = SampleSet { prompt.prompt_id, prompt.question, Strategy::toa, params.N },
        .tree = SearchTree { std::move(agent_ids) },
        .ledger = BudgetLedger { pool.flops_multiplier() },
        .log = {},
    };
    run.log.reserve(params.N);

    while (run.tree.response_count() < params.N)
    {
        auto selection = Selection {};
        try
        {
            selection = select_action(run.tree, params);
        }
        catch (const SearchExhausted& e)
        {
            throw ToaSearchExhausted(e.what(), std::make_shared<const ToaRun>(std::move(run)));
        }

        const auto expansion =
            expand_model_node(run.tree, selection.model_node, pool, prompt, run.samples, run.ledger, params);
        backpropagate(run.tree, expansion.response_node, expansion.reward);

        auto path = std::move(selection.path);
        path.push_back(expansion.response_node);
        run.log.push_back(SimulationStep {
            .path = std::move(path),
            .reward = expansion.reward,
            .decisions = std::move(selection.decisions),
            .expanded_response = selection.expanded_response,
            .total_flops = run.ledger.total_flops(),
        });
    }
    return run;
}

} // namespace toa
