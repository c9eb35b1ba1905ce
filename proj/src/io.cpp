// SPDX-License-Identifier: Apache-2.0
#include <toa/io.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace toa::io
{

using nlohmann::json;

namespace
{
    template <typename T>
    json optional_json(const std::optional<T>& v)
    {
        return v ? json(*v) : json(nullptr);
    }

    template <typename T>
    std::optional<T> optional_from(const json& j, const char* key)
    {
        if (!j.contains(key) || j[key].is_null())
            return std::nullopt;
        return j[key].get<T>();
    }

    std::string_view merge_mode_name(RootMergeMode m)
    {
        return m == RootMergeMode::fresh ? "fresh" : "refine";
    }
} // namespace

std::vector<PromptRecord> read_prompts(const std::filesystem::path& path)
{
    auto in = std::ifstream { path };
    if (!in)
        throw IoError("cannot read prompts file '" + path.string() + "'");

    auto prompts = std::vector<PromptRecord> {};
    auto seen = std::set<std::string> {};
    auto line = std::string {};
    for (auto number = 1; std::getline(in, line); ++number)
    {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto where = path.string() + ":" + std::to_string(number);
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw IoError(where + ": not a JSON object");
        if (!j.contains("prompt_id") || !j.contains("question") || !j["question"].is_string())
            throw IoError(where + ": needs string fields prompt_id and question");
        auto record = PromptRecord {};
        record.prompt_id = j["prompt_id"].is_string() ? j["prompt_id"].get<std::string>() : j["prompt_id"].dump();
        record.question = j["question"].get<std::string>();
        if (j.contains("answer") && !j["answer"].is_null())
            record.answer = j["answer"].is_string() ? j["answer"].get<std::string>() : j["answer"].dump();
        if (!seen.insert(record.prompt_id).second)
            throw IoError(where + ": duplicate prompt_id '" + record.prompt_id + "'");
        prompts.push_back(std::move(record));
    }
    return prompts;
}

json sample_to_json(const std::string& prompt_id, const Sample& s)
{
    return json {
        { "prompt_id", prompt_id },
        { "sample_index", s.sample_index },
        { "agent_id", s.agent_id },
        { "parent_index", optional_json(s.parent_index) },
        { "moa_context_indices", s.moa_context_indices },
        { "reward", optional_json(s.reward) },
        { "prompt_tokens", s.prompt_tokens },
        { "completion_tokens", s.completion_tokens },
        { "seed", s.seed },
        { "text", s.text },
    };
}

void write_samples_jsonl(std::ostream& out, const SampleSet& set)
{
    for (const auto& s: set.samples())
        out << sample_to_json(set.prompt_id(), s).dump() << '\n';
}

std::vector<SampleSet> read_samples_jsonl(const std::filesystem::path& path, Strategy strategy)
{
    auto in = std::ifstream { path };
    if (!in)
        throw MissingArtifact("cannot read samples file '" + path.string() + "'");

    auto records = std::vector<std::pair<std::string, std::vector<Sample>>> {};
    auto line = std::string {};
    for (auto number = 1; std::getline(in, line); ++number)
    {
        if (line.empty())
            continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw IoError(path.string() + ":" + std::to_string(number) + ": not valid JSON");
        auto s = Sample {};
        s.sample_index = j.at("sample_index").get<std::size_t>();
        s.agent_id = j.at("agent_id").get<std::string>();
        s.parent_index = optional_from<std::size_t>(j, "parent_index");
        s.moa_context_indices = j.value("moa_context_indices", std::vector<std::size_t> {});
        s.reward = optional_from<double>(j, "reward");
        s.prompt_tokens = j.value("prompt_tokens", std::uint64_t { 0 });
        s.completion_tokens = j.value("completion_tokens", std::uint64_t { 0 });
        s.seed = j.value("seed", std::uint64_t { 0 });
        s.text = j.value("text", std::string {});
        const auto prompt_id = j.at("prompt_id").get<std::string>();
        if (records.empty() || records.back().first != prompt_id)
            records.emplace_back(prompt_id, std::vector<Sample> {});
        records.back().second.push_back(std::move(s));
    }

    auto sets = std::vector<SampleSet> {};
    for (auto& [prompt_id, samples]: records)
    {
        auto set = SampleSet { prompt_id, "", strategy, samples.size() };
        for (auto& s: samples)
        {
            const auto expected = s.sample_index;
            if (set.register_sample(std::move(s)) != expected)
                throw IoError("samples for prompt '" + prompt_id + "' are not stored in index order");
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

json ledger_to_json(const BudgetLedger& ledger)
{
    auto agents = json::object();
    for (const auto& [id, u]: ledger.per_agent())
        agents[id] = json {
            { "calls", u.calls },
            { "prompt_tokens", u.prompt_tokens },
            { "completion_tokens", u.completion_tokens },
            { "flops", u.flops },
        };
    return json {
        { "flops_multiplier", ledger.flops_multiplier() },
        { "total_flops", ledger.total_flops() },
        { "generation_flops", ledger.generation_flops() },
        { "reward_flops", ledger.reward_flops() },
        { "per_agent", agents },
    };
}

BudgetLedger ledger_from_json(const json& j)
{
    auto ledger = BudgetLedger { j.value("flops_multiplier", 2.0) };
    for (const auto& [id, u]: j.at("per_agent").items())
        ledger.restore(id, AgentUsage {
                               .calls = u.at("calls").get<std::uint64_t>(),
                               .prompt_tokens = u.at("prompt_tokens").get<std::uint64_t>(),
                               .completion_tokens = u.at("completion_tokens").get<std::uint64_t>(),
                               .flops = u.at("flops").get<double>(),
                           });
    return ledger;
}

json tree_to_json(const std::string& prompt_id, const ToaParams& params, const SearchTree& tree,
                  const std::vector<SimulationStep>& log)
{
    auto nodes = json::array();
    for (const auto& node: tree.nodes())
        nodes.push_back(json {
            { "node_id", node.node_id },
            { "kind", to_string(node.kind) },
            { "agent_id", optional_json(node.agent_id) },
            { "sample_index", optional_json(node.sample_index) },
            { "parent_id", optional_json(node.parent_id) },
            { "children_ids", node.children_ids },
            { "v", node.v },
            { "n", node.n },
            { "inherited_from_root", node.inherited_from_root },
            { "reward", optional_json(node.reward) },
            { "refined_sample", optional_json(node.refined_sample) },
            { "depth", node.depth },
        });
    auto simulations = json::array();
    for (const auto& step: log)
        simulations.push_back(json { { "path", step.path }, { "r", step.reward } });

    return json {
        { "format", "toa-tree" },
        { "version", TreeFormatVersion },
        { "prompt_id", prompt_id },
        { "params",
          {
              { "N", params.N },
              { "alpha", params.alpha },
              { "max_width", params.max_width },
              { "max_depth", optional_json(params.max_depth) },
              { "root_merge_mode", merge_mode_name(params.root_merge_mode) },
              { "ucb_parent_visits", params.ucb_parent_visits },
          } },
        { "agents", tree.agent_ids() },
        { "response_count", tree.response_count() },
        { "nodes", nodes },
        { "simulations", simulations },
    };
}

TreeDocument tree_from_json(const json& j)
{
    if (j.value("format", std::string {}) != "toa-tree")
        throw IoError("not a search tree document");
    if (j.value("version", 0) != TreeFormatVersion)
        throw IoError("unsupported tree format version " + std::to_string(j.value("version", 0)));

    const auto& p = j.at("params");
    auto params = ToaParams {};
    params.N = p.at("N").get<std::size_t>();
    params.alpha = p.at("alpha").get<double>();
    params.max_width = p.at("max_width").get<std::size_t>();
    params.max_depth = optional_from<std::size_t>(p, "max_depth");
    params.root_merge_mode =
        p.value("root_merge_mode", std::string { "refine" }) == "fresh" ? RootMergeMode::fresh : RootMergeMode::refine;
    params.ucb_parent_visits = p.value("ucb_parent_visits", false);

    auto tree = SearchTree { j.at("agents").get<std::vector<std::string>>() };
    const auto& nodes = j.at("nodes");
    for (const auto& n: nodes)
    {
        const auto id = n.at("node_id").get<NodeId>();
        const auto kind = n.at("kind").get<std::string>();
        if (id >= tree.nodes().size())
        {
            const auto parent = n.at("parent_id").get<NodeId>();
            auto created = NodeId {};
            if (kind == "model")
                created = tree.add_model_node(parent, n.at("agent_id").get<std::string>(),
                                              n.value("inherited_from_root", false));
            else if (kind == "response")
                created = tree.add_response_node(parent, n.at("sample_index").get<std::size_t>(),
                                                 n.at("reward").get<double>(),
                                                 optional_from<std::size_t>(n, "refined_sample"));
            else
                throw IoError("node " + std::to_string(id) + " has unexpected kind '" + kind + "'");
            if (created != id)
                throw IoError("node ids are not dense and ordered at node " + std::to_string(id));
        }
        auto& node = tree.node(id);
        if (std::string { to_string(node.kind) } != kind)
            throw IoError("node " + std::to_string(id) + " kind mismatch");
        node.v = n.at("v").get<double>();
        node.n = n.at("n").get<std::uint64_t>();
    }

    auto doc = TreeDocument { j.value("prompt_id", std::string {}), params, std::move(tree), {} };
    for (const auto& s: j.at("simulations"))
        doc.simulations.emplace_back(s.at("path").get<std::vector<NodeId>>(), s.at("r").get<double>());
    return doc;
}

json read_json_file(const std::filesystem::path& path)
{
    auto in = std::ifstream { path };
    if (!in)
        throw MissingArtifact("cannot read '" + path.string() + "'");
    auto j = json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw IoError("'" + path.string() + "' is not valid JSON");
    return j;
}

void write_text_file(const std::filesystem::path& path, std::string_view contents)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        auto out = std::ofstream { tmp, std::ios::binary | std::ios::trunc };
        if (!out)
            throw IoError("cannot write '" + path.string() + "'");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out)
            throw IoError("short write to '" + path.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path)
{
    auto in = std::ifstream { path, std::ios::binary };
    if (!in)
        throw MissingArtifact("cannot read '" + path.string() + "'");
    auto buffer = std::ostringstream {};
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace toa::io
