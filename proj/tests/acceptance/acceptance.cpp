// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include "config_docs.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <toa/cli.hpp>
#include <toa/compute.hpp>
#include <toa/config.hpp>
#include <toa/errors.hpp>
#include <toa/io.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

using namespace toa;
namespace fs = std::filesystem;

namespace
{

// Pinned tolerances and limits.
constexpr double CountsTimeLimitS = 30.0;
constexpr std::size_t ReplaySteps = 1000;
constexpr double ReplayTimeLimitS = 60.0;
constexpr int StructuralRuns = 100;
constexpr double UcbTarget = 0.51665;
constexpr double UcbTolerance = 1e-5;
constexpr double FitExactTolerance = 1e-9;
constexpr double FitNoiseSigma = 0.001;
constexpr double FitConfidenceSigmas = 3.0;
constexpr double FitTimeLimitS = 1.0;
constexpr double FlopsTarget = 1.6e13;
constexpr double MergeRelativeTolerance = 1e-12;
constexpr double OrderingMargin = 0.02;
constexpr double OrderingTimeLimitS = 120.0;
constexpr std::size_t TestbedPrompts = 50;
constexpr std::size_t TestbedSeeds = 5;
constexpr std::size_t TestbedN = 64;
constexpr std::size_t TopK = 10;

struct Outcome
{
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double value, int precision = 5)
{
    auto os = std::ostringstream {};
    os.precision(precision);
    os << std::fixed << value;
    return os.str();
}

std::size_t hardware_workers()
{
    return std::max(1U, std::thread::hardware_concurrency());
}

ToaParams default_toa(std::size_t n)
{
    auto p = ToaParams {};
    p.N = n;
    p.max_width = default_toa_width(n);
    return p;
}

// --- 1 ---------------------------------------------------------------------

bool divisibility_bound(const std::string& strategy)
{
    return strategy == "parallel_ensemble" || strategy == "sequential_refine" || strategy == "moa";
}

Outcome sample_counts()
{
    const auto start = Clock::now();
    const auto strategies = std::vector<std::string> { "random_single", "parallel_ensemble", "sequential_refine", "moa",
                                                       "toa" };
    auto runs = 0;
    auto rejected = 0;
    auto problems = std::vector<std::string> {};
    for (const auto& strategy: strategies)
        for (std::size_t k: { 2, 4, 5 })
            for (long long n: { 8, 16, 64, 160 })
            {
                const auto label = strategy + " K=" + std::to_string(k) + " N=" + std::to_string(n);
                const auto doc = fixtures::mock_config(k, n, strategy);
                if (divisibility_bound(strategy) && n % static_cast<long long>(k) != 0)
                {
                    try
                    {
                        (void)load_config(doc);
                        problems.push_back(label + " accepted without K | N");
                    }
                    catch (const ConfigError&)
                    {
                        ++rejected;
                    }
                    continue;
                }
                const auto cfg = load_config(doc);
                const auto pool = build_pool(cfg);
                const auto outcome = cli::run_prompt(pool, cfg, fixtures::prompt(0));
                ++runs;
                if (outcome.samples.size() != static_cast<std::size_t>(n))
                    problems.push_back(label + " produced " + std::to_string(outcome.samples.size()));
                if (outcome.tree && outcome.tree->response_count() != static_cast<std::size_t>(n))
                    problems.push_back(label + " tree holds " + std::to_string(outcome.tree->response_count()));
            }

    // One MoA pass is L layers of K samples.
    for (std::size_t k: { 2, 4, 5 })
        for (std::size_t layers: { 1, 2, 3, 4 })
        {
            auto doc = fixtures::mock_config(k, static_cast<long long>(layers * k), "moa");
            doc["strategy_params"]["moa"] = { { "num_layers", layers } };
            const auto cfg = load_config(doc);
            const auto outcome = cli::run_prompt(build_pool(cfg), cfg, fixtures::prompt(1));
            auto one_pass = std::size_t { 0 };
            for (const auto& s: outcome.samples.samples())
                one_pass += moa_position(s.sample_index, k, layers).pass == 0;
            if (one_pass != layers * k || outcome.samples.size() != layers * k)
                problems.push_back("moa pass with K=" + std::to_string(k) + " L=" + std::to_string(layers) + " gave "
                                   + std::to_string(one_pass));
        }

    const auto elapsed = seconds_since(start);
    if (elapsed >= CountsTimeLimitS)
        problems.push_back("took " + fmt(elapsed, 1) + " s");
    auto detail = std::to_string(runs) + " runs exact, " + std::to_string(rejected)
                  + " non-divisible configs rejected, " + fmt(elapsed, 2) + " s";
    if (!problems.empty())
        detail += "; first problem: " + problems.front();
    return { problems.empty(), detail };
}

// --- 2 ---------------------------------------------------------------------

Outcome replay_fuzz()
{
    const auto start = Clock::now();
    auto rng = std::mt19937_64 { 2024 };
    auto steps = std::size_t { 0 };
    auto decisions = std::size_t { 0 };
    auto runs = 0;
    auto problems = std::vector<std::string> {};
    while (steps < ReplaySteps)
    {
        auto spec = fixtures::uniform_landscape(2 + rng() % 4);
        spec.noise = std::uniform_real_distribution<double> { 0.0, 0.1 }(rng);
        spec.reward_noise = std::uniform_real_distribution<double> { 0.0, 0.05 }(rng);
        spec.cross_model_bonus = std::uniform_real_distribution<double> { 0.0, 0.3 }(rng);
        const auto pool = fixtures::make_pool(spec, rng());
        const auto n = 1 + rng() % 120;
        auto params = ToaParams {};
        params.N = n;
        params.max_width = 1 + rng() % n;
        params.alpha = std::exp(std::uniform_real_distribution<double> { std::log(1e-3), std::log(2.0) }(rng));
        params.ucb_parent_visits = rng() % 4 == 0;
        params.root_merge_mode = rng() % 3 == 0 ? RootMergeMode::fresh : RootMergeMode::refine;
        const auto run = run_toa(pool, fixtures::prompt(runs), params);
        const auto report = oracle::replay(run.tree, run.log, params);
        ++runs;
        steps += run.log.size();
        decisions += report.decisions_checked;
        if (!report.ok())
            problems.push_back("run " + std::to_string(runs) + ": " + report.problems.front());
    }
    const auto elapsed = seconds_since(start);
    if (elapsed >= ReplayTimeLimitS)
        problems.push_back("took " + fmt(elapsed, 1) + " s");
    auto detail = std::to_string(steps) + " simulations over " + std::to_string(runs) + " runs, "
                  + std::to_string(decisions) + " decisions re-evaluated, " + fmt(elapsed, 2) + " s";
    if (!problems.empty())
        detail += "; " + std::to_string(problems.size()) + " problem(s), first: " + problems.front();
    return { problems.empty(), detail };
}

// --- 3 ---------------------------------------------------------------------

/// Drives the search loop step by step so inheritance can be checked against
/// the root children's stats at the moment of expansion.
std::vector<std::string> driven_run(const AgentPool& pool, const PromptContext& prompt, const ToaParams& params)
{
    auto problems = std::vector<std::string> {};
    auto agents = std::vector<std::string> {};
    for (const auto& a: pool.agents())
        agents.push_back(a.agent_id);
    auto tree = SearchTree { agents };
    auto samples = SampleSet { prompt.prompt_id, prompt.question, Strategy::toa, params.N };
    auto ledger = BudgetLedger { pool.flops_multiplier() };

    while (tree.response_count() < params.N)
    {
        auto before = std::vector<std::pair<double, std::uint64_t>> {};
        for (auto c: tree.node(0).children_ids)
            before.emplace_back(tree.node(c).v, tree.node(c).n);
        const auto sel = select_action(tree, params);
        if (sel.expanded_response)
        {
            const auto& children = tree.node(*sel.expanded_response).children_ids;
            if (children.size() != agents.size())
                problems.push_back("expansion created " + std::to_string(children.size()) + " model children");
            for (std::size_t i = 0; i < children.size(); ++i)
            {
                const auto& child = tree.node(children[i]);
                const auto source = tree.root_child(*child.agent_id) - 1;
                if (!child.inherited_from_root || child.v != before[source].first || child.n != before[source].second)
                    problems.push_back("model node " + std::to_string(child.node_id) + " did not inherit ("
                                       + fmt(before[source].first) + ", " + std::to_string(before[source].second)
                                       + ")");
            }
        }
        const auto expansion = expand_model_node(tree, sel.model_node, pool, prompt, samples, ledger, params);
        backpropagate(tree, expansion.response_node, expansion.reward);

        const auto path = tree.path_from_root(expansion.response_node);
        for (std::size_t i = 1; i < path.size(); ++i)
        {
            const auto expected = i % 2 == 1 ? NodeKind::model : NodeKind::response;
            if (tree.node(path[i]).kind != expected)
                problems.push_back("path to node " + std::to_string(path.back()) + " does not alternate");
        }
    }
    for (auto& p: oracle::structural_problems(tree, params))
        problems.push_back(std::move(p));
    return problems;
}

Outcome structural_properties()
{
    auto rng = std::mt19937_64 { 99 };
    auto problems = std::vector<std::string> {};
    auto responses = std::size_t { 0 };
    for (int run = 0; run < StructuralRuns; ++run)
    {
        auto spec = fixtures::uniform_landscape(2 + rng() % 4);
        spec.noise = 0.05;
        const auto pool = fixtures::make_pool(spec, rng());
        const auto n = 1 + rng() % 80;
        auto params = ToaParams {};
        params.N = n;
        params.max_width = 1 + rng() % std::max<std::size_t>(1, n / 2);
        params.alpha = std::uniform_real_distribution<double> { 0.001, 1.0 }(rng);
        params.root_merge_mode = run % 2 ? RootMergeMode::fresh : RootMergeMode::refine;
        for (auto& p: driven_run(pool, fixtures::prompt(run), params))
            problems.push_back("run " + std::to_string(run) + ": " + p);
        responses += n;

        const auto full = run_toa(pool, fixtures::prompt(run), params);
        for (auto& p: oracle::structural_problems(full.tree, params))
            problems.push_back("run_toa " + std::to_string(run) + ": " + p);
    }
    auto detail = std::to_string(StructuralRuns) + " random runs, " + std::to_string(responses) + " responses";
    if (!problems.empty())
        detail += "; " + std::to_string(problems.size()) + " problem(s), first: " + problems.front();
    return { problems.empty(), detail };
}

// --- 4 ---------------------------------------------------------------------

Outcome ucb_value()
{
    const auto got = ucb_score(1.5, 3, 64, 0.01);
    const auto reference = static_cast<double>(oracle::ucb(1.5L, 3, 64, 0.01L));
    const auto pass = std::abs(got - UcbTarget) <= UcbTolerance && std::abs(got - reference) <= UcbTolerance;
    return { pass, "ucb_score(1.5, 3, 64, 0.01) = " + fmt(got, 8) + ", long-double reference " + fmt(reference, 8) };
}

// --- 5 ---------------------------------------------------------------------

Outcome fit_recovery()
{
    const auto start = Clock::now();
    constexpr double a = -0.0031, b = 0.11, c = -0.71;
    auto exact = std::vector<ScalingPoint> {};
    auto noisy = std::vector<ScalingPoint> {};
    auto rng = std::mt19937_64 { 5 };
    auto noise = std::normal_distribution<double> { 0.0, FitNoiseSigma };
    for (int i = 0; i <= 40; ++i)
    {
        const auto x = 12.0 + 0.2 * i;
        const auto r = a * x * x + b * x + c;
        exact.push_back({ std::pow(10.0, x), r });
        noisy.push_back({ std::pow(10.0, x), r + noise(rng) });
    }
    const auto fe = fit_scaling_curve(exact);
    const auto exact_err = std::max({ std::abs(fe.a - a), std::abs(fe.b - b), std::abs(fe.c - c) });

    const auto fn = fit_scaling_curve(noisy);
    const auto za = std::abs(fn.a - a) / fn.std_errors[0];
    const auto zb = std::abs(fn.b - b) / fn.std_errors[1];
    const auto zc = std::abs(fn.c - c) / fn.std_errors[2];
    const auto elapsed = seconds_since(start);

    const auto pass = exact_err <= FitExactTolerance && za <= FitConfidenceSigmas && zb <= FitConfidenceSigmas
                      && zc <= FitConfidenceSigmas && elapsed < FitTimeLimitS;
    auto os = std::ostringstream {};
    os.precision(3);
    os << "noiseless max error " << std::scientific << exact_err << "; noisy |error|/se = " << std::fixed << za << ", "
       << zb << ", " << zc << "; " << elapsed * 1000 << " ms";
    return { pass, os.str() };
}

// --- 6 ---------------------------------------------------------------------

Outcome flops_ledger()
{
    auto problems = std::vector<std::string> {};
    const auto flops = call_flops(8'000'000'000ULL, 600, 400);
    if (flops != FlopsTarget)
        problems.push_back("call_flops gave " + fmt(flops, 1));

    auto rng = std::mt19937_64 { 6 };
    for (int trial = 0; trial < 50; ++trial)
    {
        auto make = [&] {
            auto l = BudgetLedger {};
            for (int i = 0, count = static_cast<int>(rng() % 30); i < count; ++i)
                (void)l.record("agent" + std::to_string(rng() % 5), 1 + rng() % 70'000'000'000ULL, rng() % 4000,
                               rng() % 4000);
            return l;
        };
        const auto x = make(), y = make(), z = make();
        auto left = x;
        left.merge(y);
        left.merge(z);
        auto yz = y;
        yz.merge(z);
        auto right = x;
        right.merge(yz);
        auto ok = left.per_agent().size() == right.per_agent().size();
        for (const auto& [id, u]: left.per_agent())
        {
            const auto it = right.per_agent().find(id);
            ok = ok && it != right.per_agent().end() && u.calls == it->second.calls
                 && u.prompt_tokens == it->second.prompt_tokens && u.completion_tokens == it->second.completion_tokens
                 && std::abs(u.flops - it->second.flops) <= MergeRelativeTolerance * std::abs(u.flops);
        }
        ok = ok && std::abs(left.total_flops() - right.total_flops()) <= MergeRelativeTolerance * left.total_flops();
        if (!ok)
            problems.push_back("merge not associative in trial " + std::to_string(trial));
    }

    // Totals along a search never decrease.
    const auto pool = fixtures::make_pool({}, 6);
    const auto run = run_toa(pool, fixtures::prompt(0), default_toa(64));
    auto previous = 0.0;
    for (const auto& step: run.log)
    {
        if (step.total_flops < previous)
            problems.push_back("ledger decreased during the search");
        previous = step.total_flops;
    }
    if (previous != run.ledger.total_flops())
        problems.push_back("logged total differs from the final ledger");

    auto detail = "call_flops(8e9, 600, 400) = " + fmt(flops, 1) + ", 50 merge trials, "
                  + std::to_string(run.log.size()) + " monotone steps";
    if (!problems.empty())
        detail += "; first problem: " + problems.front();
    return { problems.empty(), detail };
}

// --- 7, 8, 9 ---------------------------------------------------------------

struct TestbedResults
{
    std::map<std::string, double> top_k;
    std::vector<analysis::RefinementPath> toa_paths;
    double capped_top_k = 0.0;
    double elapsed = 0.0;
};

TestbedResults run_testbed()
{
    const auto start = Clock::now();
    auto spec = fixtures::LandscapeSpec {};
    spec.noise = 0.02;
    spec.cross_model_bonus = 0.1;

    const auto labels = std::vector<std::string> { "random_single:agent0", "random_single:agent1",
                                                   "random_single:agent2", "random_single:agent3",
                                                   "parallel_ensemble",    "sequential_refine",
                                                   "toa",                  "toa:depth<=2" };
    const auto jobs = TestbedPrompts * TestbedSeeds;
    auto sums = std::vector<std::vector<double>>(jobs, std::vector<double>(labels.size(), 0.0));
    auto paths = std::vector<analysis::RefinementPath>(jobs);

    auto capped = default_toa(TestbedN);
    capped.max_depth = 2;

    parallel_for(jobs, hardware_workers(), [&](std::size_t job) {
        const auto seed = job / TestbedPrompts;
        const auto prompt = fixtures::prompt(job % TestbedPrompts);
        const auto pool = fixtures::make_pool(spec, 1000 + seed);
        auto& row = sums[job];
        for (std::size_t a = 0; a < 4; ++a)
            row[a] = analysis::top_k_mean(
                random_single(pool, prompt, TestbedN, RandomSingleParams { fixtures::agent_name(a) }).samples, TopK);
        row[4] = analysis::top_k_mean(parallel_ensemble(pool, prompt, TestbedN).samples, TopK);
        row[5] = analysis::top_k_mean(sequential_refine(pool, prompt, TestbedN).samples, TopK);
        const auto toa = run_toa(pool, prompt, default_toa(TestbedN));
        row[6] = analysis::top_k_mean(toa.samples, TopK);
        paths[job] = analysis::best_path(toa.tree, prompt.prompt_id);
        row[7] = analysis::top_k_mean(run_toa(pool, prompt, capped).samples, TopK);
    });

    auto results = TestbedResults {};
    for (std::size_t l = 0; l < labels.size(); ++l)
    {
        auto total = 0.0;
        for (const auto& row: sums)
            total += row[l];
        results.top_k[labels[l]] = total / static_cast<double>(jobs);
    }
    results.capped_top_k = results.top_k["toa:depth<=2"];
    results.toa_paths = std::move(paths);
    results.elapsed = seconds_since(start);
    return results;
}

Outcome testbed_ordering(const TestbedResults& r)
{
    const auto toa = r.top_k.at("toa");
    const auto seq = r.top_k.at("sequential_refine");
    const auto ens = r.top_k.at("parallel_ensemble");
    auto best_single = 0.0;
    for (std::size_t a = 0; a < 4; ++a)
        best_single = std::max(best_single, r.top_k.at("random_single:agent" + std::to_string(a)));

    auto failed = std::vector<std::string> {};
    if (!(toa > seq))
        failed.push_back("toa > sequential_refine");
    if (!(seq >= ens))
        failed.push_back("sequential_refine >= parallel_ensemble");
    if (!(ens > best_single))
        failed.push_back("parallel_ensemble > best random_single");
    if (!(toa - ens >= OrderingMargin))
        failed.push_back("toa - parallel_ensemble >= " + fmt(OrderingMargin, 2));
    if (r.elapsed >= OrderingTimeLimitS)
        failed.push_back("runtime < " + fmt(OrderingTimeLimitS, 0) + " s");

    auto detail = "top-" + std::to_string(TopK) + " means: toa " + fmt(toa) + ", sequential_refine " + fmt(seq)
                  + ", parallel_ensemble " + fmt(ens) + ", best random_single " + fmt(best_single) + "; "
                  + fmt(r.elapsed, 1) + " s";
    if (!failed.empty())
    {
        detail += "; violated:";
        for (const auto& f: failed)
            detail += " [" + f + "]";
    }
    return { failed.empty(), detail };
}

Outcome diversity(const TestbedResults& r)
{
    const auto stats = analysis::transition_proportions(r.toa_paths);
    auto agents = std::vector<std::string> {};
    for (std::size_t a = 0; a < 4; ++a)
        agents.push_back(fixtures::agent_name(a));
    const auto same = stats.mean_diagonal(agents);
    const auto cross = stats.mean_off_diagonal(agents);
    auto transitions = std::size_t { 0 };
    for (const auto& [key, count]: stats.counts)
        transitions += count;
    return { same < cross, "mean same-agent successor proportion " + fmt(same) + ", mean cross-agent " + fmt(cross)
                               + " over " + std::to_string(transitions) + " transitions in "
                               + std::to_string(r.toa_paths.size()) + " best paths" };
}

Outcome depth_tradeoff(const TestbedResults& r)
{
    const auto unlimited = r.top_k.at("toa");
    return { unlimited >= r.capped_top_k,
             "unlimited depth " + fmt(unlimited) + " vs depth capped at 2 " + fmt(r.capped_top_k) };
}

// --- 10 --------------------------------------------------------------------

Outcome determinism()
{
    const auto root = fs::temp_directory_path() / ("toa-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(root);
    auto compared = 0;
    auto differing = std::vector<std::string> {};
    for (const auto* strategy: { "toa", "moa", "sequential_refine" })
    {
        auto options = cli::RunOptions {};
        options.config_path = TOA_SOURCE_DIR "/configs/mock_testbed.json";
        options.prompts_path = TOA_SOURCE_DIR "/data/prompts_demo.jsonl";
        options.strategy = strategy;
        options.out_dir = root / (std::string { strategy } + "-a");
        options.workers = 1;
        const auto first = cli::cmd_run(options);
        options.out_dir = root / (std::string { strategy } + "-b");
        options.workers = 4;
        const auto second = cli::cmd_run(options);

        auto files = std::vector<fs::path> { first.samples_file, first.ledger_file };
        files.insert(files.end(), first.tree_files.begin(), first.tree_files.end());
        if (first.tree_files != second.tree_files || first.run_id != second.run_id)
            differing.push_back(std::string { strategy } + " manifest");
        for (const auto& f: files)
        {
            ++compared;
            if (io::read_text_file(root / (std::string { strategy } + "-a") / f)
                != io::read_text_file(root / (std::string { strategy } + "-b") / f))
                differing.push_back(std::string { strategy } + "/" + f.string());
        }
    }
    fs::remove_all(root);
    auto detail = std::to_string(compared) + " artifacts compared byte for byte across two runs";
    if (!differing.empty())
        detail += "; differing: " + differing.front();
    return { differing.empty(), detail };
}

} // namespace

int main()
{
    auto failures = 0;
    auto report = [&](int id, const std::string& name, const std::function<Outcome()>& check) {
        auto outcome = Outcome {};
        try
        {
            outcome = check();
        }
        catch (const std::exception& e)
        {
            outcome = { false, std::string { "threw: " } + e.what() };
        }
        failures += !outcome.pass;
        std::printf("%s %2d %s: %s\n", outcome.pass ? "PASS" : "FAIL", id, name.c_str(), outcome.detail.c_str());
        std::fflush(stdout);
    };

    report(1, "strategy sample counts", sample_counts);
    report(2, "search log replay", replay_fuzz);
    report(3, "tree structure", structural_properties);
    report(4, "UCB value", ucb_value);
    report(5, "scaling fit recovery", fit_recovery);
    report(6, "FLOPs ledger", flops_ledger);

    auto testbed = std::optional<TestbedResults> {};
    auto testbed_error = std::string {};
    try
    {
        testbed = run_testbed();
    }
    catch (const std::exception& e)
    {
        testbed_error = e.what();
    }
    auto from_testbed = [&](Outcome (*check)(const TestbedResults&)) {
        return [&, check]() -> Outcome {
            if (!testbed)
                return { false, "testbed runs threw: " + testbed_error };
            return check(*testbed);
        };
    };
    report(7, "testbed ordering", from_testbed(testbed_ordering));
    report(8, "best-path diversity", from_testbed(diversity));
    report(9, "depth over width", from_testbed(depth_tradeoff));
    report(10, "determinism", determinism);

    std::printf("%d of 10 criteria passed\n", 10 - failures);
    return failures == 0 ? 0 : 1;
}
