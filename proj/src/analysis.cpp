// SPDX-License-Identifier: Apache-2.0
#include <toa/analysis.hpp>

#include <algorithm>
#include <limits>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>

namespace toa::analysis
{

namespace
{
    double reward_of(const Sample& s)
    {
        if (!s.reward)
            throw std::invalid_argument("sample " + std::to_string(s.sample_index) + " has not been scored");
        return *s.reward;
    }

    std::optional<NodeId> best_response(const SearchTree& tree)
    {
        auto best = std::optional<NodeId> {};
        for (const auto& node: tree.nodes())
        {
            if (node.kind != NodeKind::response)
                continue;
            if (!best)
            {
                best = node.node_id;
                continue;
            }
            const auto& current = tree.node(*best);
            if (*node.reward > *current.reward
                || (*node.reward == *current.reward && node.sample_index < current.sample_index))
                best = node.node_id;
        }
        return best;
    }

    std::string escape(std::string_view s)
    {
        auto out = std::string {};
        for (char c: s)
        {
            if (c == '"' || c == '\\')
                out += '\\';
            out += c;
        }
        return out;
    }

    std::string short_number(double x)
    {
        auto os = std::ostringstream {};
        os.precision(4);
        os << x;
        return os.str();
    }
} // namespace

const Sample& best_of_n(const SampleSet& set)
{
    if (set.size() == 0)
        throw EmptySet("best_of_n needs at least one sample");
    const Sample* best = &set.samples().front();
    for (const auto& s: set.samples())
        if (reward_of(s) > reward_of(*best))
            best = &s;
    return *best;
}

double top_k_mean(const SampleSet& set, std::size_t k)
{
    if (k == 0 || k > set.size())
        throw KTooLarge("k=" + std::to_string(k) + " but the set holds " + std::to_string(set.size()) + " samples");
    auto rewards = std::vector<double> {};
    rewards.reserve(set.size());
    for (const auto& s: set.samples())
        rewards.push_back(reward_of(s));
    std::partial_sort(rewards.begin(), rewards.begin() + static_cast<std::ptrdiff_t>(k), rewards.end(),
                      std::greater<> {});
    auto sum = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        sum += rewards[i];
    return sum / static_cast<double>(k);
}

std::optional<std::string> default_extract_answer(std::string_view text)
{
    constexpr std::string_view Boxed = "\\boxed{";
    if (auto pos = text.rfind(Boxed); pos != std::string_view::npos)
    {
        auto depth = 1;
        const auto start = pos + Boxed.size();
        for (auto i = start; i < text.size(); ++i)
        {
            if (text[i] == '{')
                ++depth;
            else if (text[i] == '}' && --depth == 0)
                return std::string { text.substr(start, i - start) };
        }
    }
    static const auto number = std::regex { R"(-?\d+(?:\.\d+)?)" };
    auto last = std::optional<std::string> {};
    const auto s = std::string { text };
    for (auto it = std::sregex_iterator(s.begin(), s.end(), number); it != std::sregex_iterator(); ++it)
        last = it->str();
    return last;
}

AnswerExtractor regex_extractor(const std::string& pattern)
{
    return [re = std::regex { pattern }](std::string_view text) -> std::optional<std::string> {
        const auto s = std::string { text };
        auto last = std::optional<std::string> {};
        for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it)
            last = it->size() > 1 ? (*it)[1].str() : it->str();
        return last;
    };
}

std::string majority_vote(const SampleSet& set, const AnswerExtractor& extractor, std::size_t first_n)
{
    if (first_n > set.size())
        throw KTooLarge("first_n=" + std::to_string(first_n) + " exceeds the " + std::to_string(set.size())
                        + " available samples");

    // The winner is the answer with the highest count; among tied answers,
    // the one whose count reached that level at the earliest sample.
    auto counts = std::unordered_map<std::string, std::size_t> {};
    auto reached = std::unordered_map<std::string, std::vector<std::size_t>> {};
    for (std::size_t i = 0; i < first_n; ++i)
    {
        auto answer = extractor(set.at(i).text);
        if (!answer)
            continue;
        ++counts[*answer];
        reached[*answer].push_back(i);
    }
    if (counts.empty())
        throw NoExtractableAnswer("no answer could be extracted from the first " + std::to_string(first_n)
                                  + " samples");

    auto top = std::size_t { 0 };
    for (const auto& [_, c]: counts)
        top = std::max(top, c);
    auto winner = std::string {};
    auto when = set.size();
    for (const auto& [answer, c]: counts)
        if (c == top && reached[answer][top - 1] < when)
        {
            when = reached[answer][top - 1];
            winner = answer;
        }
    return winner;
}

std::string RefinementPath::key() const
{
    auto out = std::string {};
    for (std::size_t i = 0; i < agent_sequence.size(); ++i)
    {
        if (i > 0)
            out += "->";
        out += agent_sequence[i];
    }
    return out;
}

RefinementPath best_path(const SearchTree& tree, std::string prompt_id)
{
    const auto best = best_response(tree);
    if (!best)
        throw EmptyTree("tree has no response nodes");

    auto path = RefinementPath { {}, *tree.node(*best).reward, std::move(prompt_id) };
    auto current = *best;
    while (true)
    {
        const auto& response = tree.node(current);
        const auto& model = tree.node(*response.parent_id);
        path.agent_sequence.push_back(*model.agent_id);
        if (!response.refined_sample)
            break;
        current = *model.parent_id;
        if (tree.node(current).kind != NodeKind::response || tree.node(current).sample_index != response.refined_sample)
            throw std::logic_error("refined sample is not the tree parent of its refinement");
    }
    std::reverse(path.agent_sequence.begin(), path.agent_sequence.end());
    return path;
}

PathFrequencies path_frequencies(std::span<const RefinementPath> paths, std::size_t top)
{
    if (top == 0)
        throw std::invalid_argument("top must be at least 1");
    auto counts = std::map<std::string, std::size_t> {};
    auto result = PathFrequencies {};
    for (const auto& p: paths)
    {
        ++counts[p.key()];
        const auto distinct = std::set<std::string>(p.agent_sequence.begin(), p.agent_sequence.end()).size();
        ++result.distinct_models[distinct];
    }
    result.total = paths.size();
    for (const auto& [path, count]: counts)
        result.ranked.push_back({ path, count });
    std::stable_sort(result.ranked.begin(), result.ranked.end(),
                     [](const PathCount& a, const PathCount& b) { return a.count > b.count; });
    if (result.ranked.size() > top)
        result.ranked.resize(top);
    return result;
}

TransitionStats transition_proportions(std::span<const RefinementPath> paths)
{
    auto stats = TransitionStats {};
    auto row_totals = std::map<std::string, std::size_t> {};
    for (const auto& p: paths)
        for (std::size_t i = 1; i < p.agent_sequence.size(); ++i)
        {
            ++stats.counts[{ p.agent_sequence[i - 1], p.agent_sequence[i] }];
            ++row_totals[p.agent_sequence[i - 1]];
        }
    for (const auto& [cell, count]: stats.counts)
        stats.row_proportions[cell] = static_cast<double>(count) / static_cast<double>(row_totals[cell.first]);
    return stats;
}

double TransitionStats::mean_diagonal(std::span<const std::string> agents) const
{
    auto sum = 0.0;
    auto rows = 0;
    for (const auto& a: agents)
    {
        auto has_row = std::any_of(row_proportions.begin(), row_proportions.end(),
                                   [&](const auto& cell) { return cell.first.first == a; });
        if (!has_row)
            continue;
        ++rows;
        if (auto it = row_proportions.find({ a, a }); it != row_proportions.end())
            sum += it->second;
    }
    return rows == 0 ? 0.0 : sum / rows;
}

double TransitionStats::mean_off_diagonal(std::span<const std::string> agents) const
{
    auto sum = 0.0;
    auto cells = 0;
    for (const auto& a: agents)
    {
        auto has_row = std::any_of(row_proportions.begin(), row_proportions.end(),
                                   [&](const auto& cell) { return cell.first.first == a; });
        if (!has_row)
            continue;
        for (const auto& b: agents)
        {
            if (a == b)
                continue;
            ++cells;
            if (auto it = row_proportions.find({ a, b }); it != row_proportions.end())
                sum += it->second;
        }
    }
    return cells == 0 ? 0.0 : sum / cells;
}

LayerStats layer_reward_stats(const SearchTree& tree)
{
    const auto best = best_response(tree);
    if (!best)
        throw EmptyTree("tree has no response nodes");

    auto stats = LayerStats {};
    for (const auto& node: tree.nodes())
    {
        if (node.kind == NodeKind::response)
            stats.holds_best.try_emplace(node.depth, 0);
        if (node.kind != NodeKind::model || node.children_ids.empty())
            continue;
        auto top = -std::numeric_limits<double>::infinity();
        for (auto c: node.children_ids)
            top = std::max(top, *tree.node(c).reward);
        stats.records.push_back({ node.node_id, *node.agent_id, node.depth + 1, top });
    }
    stats.holds_best[tree.node(*best).depth] = 1;
    return stats;
}

std::vector<double> moving_average(std::span<const double> series, std::size_t window)
{
    if (window == 0)
        throw std::invalid_argument("window must be at least 1");
    auto out = std::vector<double>(series.size());
    for (std::size_t i = 0; i < series.size(); ++i)
    {
        const auto span = std::min(window, i + 1);
        auto sum = 0.0;
        for (std::size_t j = i + 1 - span; j <= i; ++j)
            sum += series[j];
        out[i] = sum / static_cast<double>(span);
    }
    return out;
}

std::string export_dot(const SearchTree& tree)
{
    auto highlighted = std::set<NodeId> {};
    if (auto best = best_response(tree))
        for (auto id: tree.path_from_root(*best))
            highlighted.insert(id);

    auto os = std::ostringstream {};
    os << "digraph toa {\n";
    os << "  node [fontname=\"Helvetica\"];\n";
    for (const auto& node: tree.nodes())
    {
        auto label = std::string {};
        auto shape = "ellipse";
        switch (node.kind)
        {
            case NodeKind::root:
                label = "root";
                shape = "doublecircle";
                break;
            case NodeKind::model:
                label = *node.agent_id + "(" + short_number(node.v) + "/" + std::to_string(node.n) + ")";
                shape = "box";
                break;
            case NodeKind::response:
                label = std::to_string(*node.sample_index) + "(" + short_number(*node.reward) + ")";
                break;
        }
        os << "  n" << node.node_id << " [label=\"" << escape(label) << "\", shape=" << shape;
        if (highlighted.contains(node.node_id))
            os << ", color=red, fontcolor=red";
        os << "];\n";
    }
    for (const auto& node: tree.nodes())
        for (auto child: node.children_ids)
        {
            os << "  n" << node.node_id << " -> n" << child;
            if (highlighted.contains(node.node_id) && highlighted.contains(child))
                os << " [color=red, penwidth=2]";
            os << ";\n";
        }
    os << "}\n";
    return os.str();
}

} // namespace toa::analysis
