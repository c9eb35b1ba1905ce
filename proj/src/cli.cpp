// SPDX-License-Identifier: Apache-2.0
#include <toa/analysis.hpp>
#include <toa/cli.hpp>
#include <toa/io.hpp>
#include <toa/samplers.hpp>
#include <toa/seed.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace toa::cli
{

using nlohmann::json;
namespace fs = std::filesystem;

namespace
{
    std::string utc_now()
    {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        auto tm = std::tm {};
        gmtime_r(&now, &tm);
        auto os = std::ostringstream {};
        os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
        return os.str();
    }

    std::string hex64(std::uint64_t x)
    {
        auto os = std::ostringstream {};
        os << std::hex << std::setw(16) << std::setfill('0') << x;
        return os.str();
    }

    std::string csv_field(std::string_view s)
    {
        if (s.find_first_of(",\"\n") == std::string_view::npos)
            return std::string { s };
        auto out = std::string { "\"" };
        for (char c: s)
        {
            if (c == '"')
                out += '"';
            out += c;
        }
        return out + "\"";
    }

    std::string num(double x)
    {
        return format_double(x);
    }

    class CsvWriter
    {
      public:
        explicit CsvWriter(std::initializer_list<std::string_view> header) { row(header); }

        void row(std::initializer_list<std::string_view> fields)
        {
            auto first = true;
            for (auto f: fields)
            {
                if (!first)
                    _out << ',';
                _out << csv_field(f);
                first = false;
            }
            _out << '\n';
        }

        [[nodiscard]] std::string str() const { return _out.str(); }

      private:
        std::ostringstream _out;
    };

    std::string tree_file_name(std::size_t index)
    {
        auto os = std::ostringstream {};
        os << "tree_" << std::setw(4) << std::setfill('0') << index << ".json";
        return os.str();
    }

    struct LoadedRun
    {
        fs::path dir;
        json manifest;
        Strategy strategy = Strategy::parallel_ensemble;
        std::size_t n = 0;
    };

    LoadedRun load_run(const fs::path& dir)
    {
        const auto manifest_path = dir / ManifestFile;
        if (!fs::exists(manifest_path))
            throw MissingArtifact("'" + dir.string() + "' has no " + ManifestFile);
        auto run = LoadedRun { dir, io::read_json_file(manifest_path) };
        auto strategy = parse_strategy(run.manifest.at("strategy").get<std::string>());
        if (!strategy)
            throw IoError("manifest in '" + dir.string() + "' names an unknown strategy");
        run.strategy = *strategy;
        run.n = run.manifest.at("N").get<std::size_t>();
        return run;
    }

    std::vector<io::TreeDocument> load_trees(const LoadedRun& run, std::string_view report)
    {
        if (run.strategy != Strategy::toa)
            throw MissingArtifact(std::string { report } + " report needs search trees, but '" + run.dir.string()
                                  + "' was produced by " + std::string { to_string(run.strategy) });
        auto trees = std::vector<io::TreeDocument> {};
        for (const auto& name: run.manifest.at("outputs").at("trees"))
            trees.push_back(io::tree_from_json(io::read_json_file(run.dir / name.get<std::string>())));
        return trees;
    }

    std::vector<SampleSet> load_samples(const LoadedRun& run)
    {
        return io::read_samples_jsonl(run.dir / run.manifest.at("outputs").at("samples").get<std::string>(),
                                      run.strategy);
    }

    std::vector<analysis::RefinementPath> best_paths(const std::vector<LoadedRun>& runs, std::string_view report)
    {
        auto paths = std::vector<analysis::RefinementPath> {};
        for (const auto& run: runs)
            for (const auto& doc: load_trees(run, report))
                paths.push_back(analysis::best_path(doc.tree, doc.prompt_id));
        return paths;
    }

    std::vector<std::string> agents_of(const std::vector<analysis::RefinementPath>& paths)
    {
        auto agents = std::set<std::string> {};
        for (const auto& p: paths)
            agents.insert(p.agent_sequence.begin(), p.agent_sequence.end());
        return { agents.begin(), agents.end() };
    }

    fs::path emit(std::vector<fs::path>& written, const fs::path& path, std::string_view contents)
    {
        io::write_text_file(path, contents);
        written.push_back(path);
        return path;
    }

    void report_paths(const std::vector<LoadedRun>& runs, const AnalyzeOptions& o, const fs::path& out,
                      std::vector<fs::path>& written)
    {
        const auto paths = best_paths(runs, "paths");
        const auto freq = analysis::path_frequencies(paths, o.top_paths);

        auto top = CsvWriter { "rank", "path", "count", "proportion" };
        for (std::size_t i = 0; i < freq.ranked.size(); ++i)
        {
            const auto& r = freq.ranked[i];
            top.row({ std::to_string(i + 1), r.path, std::to_string(r.count),
                      num(static_cast<double>(r.count) / static_cast<double>(freq.total)) });
        }
        emit(written, out / "paths_top.csv", top.str());

        auto distinct = CsvWriter { "distinct_models", "count", "proportion" };
        for (const auto& [models, count]: freq.distinct_models)
            distinct.row({ std::to_string(models), std::to_string(count),
                           num(static_cast<double>(count) / static_cast<double>(freq.total)) });
        emit(written, out / "distinct_models.csv", distinct.str());

        for (const auto& run: runs)
        {
            const auto names = run.manifest.at("outputs").at("trees");
            for (const auto& name: names)
            {
                const auto file = fs::path { name.get<std::string>() };
                const auto doc = io::tree_from_json(io::read_json_file(run.dir / file));
                auto dot = file.stem();
                dot += ".dot";
                const auto prefix = runs.size() > 1 ? run.dir.filename() / dot : dot;
                emit(written, out / "dot" / prefix, analysis::export_dot(doc.tree));
            }
        }
    }

    void report_transitions(const std::vector<LoadedRun>& runs, const fs::path& out, std::vector<fs::path>& written)
    {
        const auto paths = best_paths(runs, "transitions");
        const auto stats = analysis::transition_proportions(paths);
        const auto agents = agents_of(paths);

        auto cells = CsvWriter { "predecessor", "successor", "count", "proportion" };
        for (const auto& [cell, count]: stats.counts)
            cells.row({ cell.first, cell.second, std::to_string(count), num(stats.row_proportions.at(cell)) });
        emit(written, out / "transitions.csv", cells.str());

        auto summary = CsvWriter { "mean_same_agent", "mean_cross_agent", "paths" };
        summary.row({ num(stats.mean_diagonal(agents)), num(stats.mean_off_diagonal(agents)),
                      std::to_string(paths.size()) });
        emit(written, out / "transitions_summary.csv", summary.str());
    }

    void report_layers(const std::vector<LoadedRun>& runs, const fs::path& out, std::vector<fs::path>& written)
    {
        auto records = CsvWriter { "prompt_id", "model_node", "agent_id", "depth", "max_reward" };
        auto best_by_depth = std::map<std::size_t, std::pair<double, std::size_t>> {};
        auto holds_best = std::map<std::size_t, std::size_t> {};
        auto step_rewards = std::vector<std::pair<double, std::size_t>> {};
        auto trees = std::size_t { 0 };

        for (const auto& run: runs)
            for (const auto& doc: load_trees(run, "layers"))
            {
                ++trees;
                const auto stats = analysis::layer_reward_stats(doc.tree);
                auto tree_best = std::map<std::size_t, double> {};
                for (const auto& r: stats.records)
                {
                    records.row({ doc.prompt_id, std::to_string(r.model_node), r.agent_id, std::to_string(r.depth),
                                  num(r.max_reward) });
                    auto [it, inserted] = tree_best.try_emplace(r.depth, r.max_reward);
                    if (!inserted)
                        it->second = std::max(it->second, r.max_reward);
                }
                for (const auto& [depth, best]: tree_best)
                {
                    best_by_depth[depth].first += best;
                    ++best_by_depth[depth].second;
                }
                for (const auto& [depth, flag]: stats.holds_best)
                    holds_best[depth] += static_cast<std::size_t>(flag);
                if (step_rewards.size() < doc.simulations.size())
                    step_rewards.resize(doc.simulations.size());
                for (std::size_t i = 0; i < doc.simulations.size(); ++i)
                {
                    step_rewards[i].first += doc.simulations[i].second;
                    ++step_rewards[i].second;
                }
            }
        emit(written, out / "layers.csv", records.str());

        auto summary = CsvWriter { "depth", "mean_max_reward", "trees", "best_fraction" };
        for (const auto& [depth, acc]: best_by_depth)
            summary.row({ std::to_string(depth), num(acc.first / static_cast<double>(acc.second)),
                          std::to_string(acc.second),
                          num(static_cast<double>(holds_best[depth]) / static_cast<double>(trees)) });
        emit(written, out / "layer_summary.csv", summary.str());

        auto means = std::vector<double> {};
        for (const auto& [sum, count]: step_rewards)
            means.push_back(sum / static_cast<double>(count));
        const auto smooth = analysis::moving_average(means, 5);
        auto steps = CsvWriter { "step", "mean_reward", "moving_average" };
        for (std::size_t i = 0; i < means.size(); ++i)
            steps.row({ std::to_string(i + 1), num(means[i]), num(smooth[i]) });
        emit(written, out / "reward_by_step.csv", steps.str());
    }

    void report_scaling(const std::vector<LoadedRun>& runs, const AnalyzeOptions& o, const fs::path& out,
                        std::vector<fs::path>& written)
    {
        auto rows = CsvWriter { "strategy", "N", "flops", "top_k_reward", "run_dir" };
        auto by_strategy = std::map<std::string, std::vector<ScalingPoint>> {};
        for (const auto& run: runs)
        {
            const auto sets = load_samples(run);
            if (sets.empty())
                throw MissingArtifact("'" + run.dir.string() + "' has no samples");
            const auto ledger = io::read_json_file(run.dir / run.manifest.at("outputs").at("ledger").get<std::string>());
            auto reward = 0.0;
            for (const auto& set: sets)
                reward += analysis::top_k_mean(set, std::min(o.top_k, set.size()));
            reward /= static_cast<double>(sets.size());
            const auto flops = ledger.at("total").at("generation_flops").get<double>() / static_cast<double>(sets.size());
            const auto strategy = std::string { to_string(run.strategy) };
            rows.row({ strategy, std::to_string(run.n), num(flops), num(reward), run.dir.string() });
            by_strategy[strategy].push_back({ flops, reward });
        }
        emit(written, out / "scaling.csv", rows.str());

        auto fits = CsvWriter { "strategy", "a", "b", "c", "rmse", "points", "se_a", "se_b", "se_c" };
        for (const auto& [strategy, points]: by_strategy)
        {
            auto distinct = std::set<double> {};
            for (const auto& p: points)
                distinct.insert(p.compute);
            if (distinct.size() < 3)
                continue;
            const auto fit = fit_scaling_curve(points);
            fits.row({ strategy, num(fit.a), num(fit.b), num(fit.c), num(fit.rmse), std::to_string(fit.points_used),
                       num(fit.std_errors[0]), num(fit.std_errors[1]), num(fit.std_errors[2]) });
        }
        emit(written, out / "scaling_fit.csv", fits.str());
    }

    void report_select(const std::vector<LoadedRun>& runs, const AnalyzeOptions& o, const fs::path& out,
                       std::vector<fs::path>& written)
    {
        const auto extractor = o.answer_pattern ? analysis::regex_extractor(*o.answer_pattern)
                                                : analysis::AnswerExtractor { analysis::default_extract_answer };
        auto rows = CsvWriter { "run_dir",     "prompt_id", "best_sample_index", "best_reward", "top_k_mean",
                                "best_answer", "majority_answer", "reference", "best_correct", "majority_correct" };
        auto summary = CsvWriter { "run_dir", "prompts", "with_reference", "best_accuracy", "majority_accuracy" };
        for (const auto& run: runs)
        {
            auto answers = std::map<std::string, std::string> {};
            if (const auto prompts = run.dir / "prompts.jsonl"; fs::exists(prompts))
                for (const auto& p: io::read_prompts(prompts))
                    if (p.answer)
                        answers.emplace(p.prompt_id, *p.answer);

            auto with_ref = std::size_t { 0 };
            auto best_ok = std::size_t { 0 };
            auto majority_ok = std::size_t { 0 };
            const auto sets = load_samples(run);
            for (const auto& set: sets)
            {
                const auto& best = analysis::best_of_n(set);
                const auto best_answer = extractor(best.text).value_or("");
                auto majority = std::string {};
                try
                {
                    majority = analysis::majority_vote(set, extractor, set.size());
                }
                catch (const NoExtractableAnswer&)
                {
                }
                const auto ref = answers.find(set.prompt_id());
                auto best_correct = std::string {};
                auto majority_correct = std::string {};
                if (ref != answers.end())
                {
                    ++with_ref;
                    best_ok += best_answer == ref->second;
                    majority_ok += majority == ref->second;
                    best_correct = best_answer == ref->second ? "1" : "0";
                    majority_correct = majority == ref->second ? "1" : "0";
                }
                rows.row({ run.dir.string(), set.prompt_id(), std::to_string(best.sample_index), num(*best.reward),
                           num(analysis::top_k_mean(set, std::min(o.top_k, set.size()))), best_answer, majority,
                           ref != answers.end() ? std::string_view { ref->second } : std::string_view {},
                           best_correct, majority_correct });
            }
            const auto accuracy = [&](std::size_t ok) {
                return with_ref == 0 ? std::string {} : num(static_cast<double>(ok) / static_cast<double>(with_ref));
            };
            summary.row({ run.dir.string(), std::to_string(sets.size()), std::to_string(with_ref), accuracy(best_ok),
                          accuracy(majority_ok) });
        }
        emit(written, out / "select.csv", rows.str());
        emit(written, out / "select_summary.csv", summary.str());
    }
} // namespace

PromptOutcome run_prompt(const AgentPool& pool, const ValidatedRunConfig& cfg, const PromptContext& prompt,
                         std::size_t workers)
{
    switch (cfg.config.strategy)
    {
        case Strategy::random_single:
        {
            auto run = random_single(pool, prompt, cfg.n, cfg.config.random_single, workers);
            return { std::move(run.samples), std::move(run.ledger), std::nullopt, {} };
        }
        case Strategy::parallel_ensemble:
        {
            auto run = parallel_ensemble(pool, prompt, cfg.n, workers);
            return { std::move(run.samples), std::move(run.ledger), std::nullopt, {} };
        }
        case Strategy::sequential_refine:
        {
            auto run = sequential_refine(pool, prompt, cfg.n, workers);
            return { std::move(run.samples), std::move(run.ledger), std::nullopt, {} };
        }
        case Strategy::moa:
        {
            auto run = mixture_of_agents(pool, prompt, cfg.n, cfg.moa, workers);
            return { std::move(run.samples), std::move(run.ledger), std::nullopt, {} };
        }
        case Strategy::toa:
        {
            auto run = run_toa(pool, prompt, cfg.toa);
            return { std::move(run.samples), std::move(run.ledger), std::move(run.tree), std::move(run.log) };
        }
    }
    throw std::logic_error("unhandled strategy");
}

RunManifest cmd_run(const RunOptions& options)
{
    auto manifest = RunManifest {};
    manifest.started_at = utc_now();

    const auto config_bytes = io::read_text_file(options.config_path);
    auto doc = json::parse(config_bytes, nullptr, false);
    if (doc.is_discarded())
        throw ConfigError("<file>", "'" + options.config_path.string() + "' is not valid JSON");
    if (doc.is_object())
    {
        if (options.strategy)
            doc["strategy"] = *options.strategy;
        if (options.n)
            doc["N"] = *options.n;
        if (options.seed)
            doc["master_seed"] = *options.seed;
    }
    const auto cfg = load_config(doc);
    const auto prompts = io::read_prompts(options.prompts_path);
    const auto prompts_bytes = io::read_text_file(options.prompts_path);

    auto id = fnv1a64(config_bytes);
    id = hash_combine(id, fnv1a64(prompts_bytes));
    id = hash_combine(id, fnv1a64(to_string(cfg.config.strategy)));
    id = hash_combine(id, static_cast<std::uint64_t>(cfg.n));
    id = hash_combine(id, cfg.config.master_seed);
    manifest.run_id = hex64(id);
    manifest.strategy = cfg.config.strategy;
    manifest.n = cfg.n;

    auto limiter = std::make_shared<ConcurrencyLimiter>(static_cast<int>(cfg.config.max_concurrency));
    const auto pool = build_pool(cfg, limiter);

    const auto workers = std::max<std::size_t>(options.workers, 1);
    const auto inner = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.config.max_concurrency) / workers);
    auto outcomes = std::vector<std::optional<PromptOutcome>>(prompts.size());
    parallel_for(prompts.size(), workers, [&](std::size_t i) {
        outcomes[i] = run_prompt(pool, cfg, { prompts[i].prompt_id, prompts[i].question }, inner);
    });

    const auto& out = options.out_dir;
    fs::create_directories(out);
    manifest.config_snapshot = "config.json";
    io::write_text_file(out / manifest.config_snapshot, config_bytes);
    io::write_text_file(out / "prompts.jsonl", prompts_bytes);

    auto samples = std::ostringstream {};
    auto total = BudgetLedger { cfg.config.flops_multiplier };
    auto per_prompt = json::object();
    auto tree_names = json::array();
    for (std::size_t i = 0; i < outcomes.size(); ++i)
    {
        const auto& o = *outcomes[i];
        io::write_samples_jsonl(samples, o.samples);
        total.merge(o.ledger);
        per_prompt[prompts[i].prompt_id] = io::ledger_to_json(o.ledger);
        if (o.tree)
        {
            const auto name = fs::path { "trees" } / tree_file_name(i);
            io::write_text_file(out / name,
                                io::tree_to_json(prompts[i].prompt_id, cfg.toa, *o.tree, o.log).dump(1) + "\n");
            manifest.tree_files.push_back(name);
            tree_names.push_back(name.generic_string());
        }
    }
    manifest.samples_file = "samples.jsonl";
    manifest.ledger_file = "ledger.json";
    io::write_text_file(out / manifest.samples_file, samples.str());
    io::write_text_file(out / manifest.ledger_file,
                        json { { "total", io::ledger_to_json(total) }, { "per_prompt", per_prompt } }.dump(1) + "\n");

    manifest.total_flops = total.total_flops();
    manifest.generation_flops = total.generation_flops();
    manifest.reward_flops = total.reward_flops();
    manifest.finished_at = utc_now();

    auto overrides = json::object();
    if (options.strategy)
        overrides["strategy"] = *options.strategy;
    if (options.n)
        overrides["N"] = *options.n;
    if (options.seed)
        overrides["master_seed"] = *options.seed;

    const auto m = json {
        { "run_id", manifest.run_id },
        { "started_at", manifest.started_at },
        { "finished_at", manifest.finished_at },
        { "strategy", to_string(manifest.strategy) },
        { "N", manifest.n },
        { "K", cfg.config.agents.size() },
        { "master_seed", cfg.config.master_seed },
        { "prompt_count", prompts.size() },
        { "overrides", overrides },
        { "config_snapshot", manifest.config_snapshot.generic_string() },
        { "outputs",
          {
              { "samples", manifest.samples_file.generic_string() },
              { "ledger", manifest.ledger_file.generic_string() },
              { "prompts", "prompts.jsonl" },
              { "trees", tree_names },
          } },
        { "ledger_summary",
          {
              { "total_flops", manifest.total_flops },
              { "generation_flops", manifest.generation_flops },
              { "reward_flops", manifest.reward_flops },
          } },
    };
    io::write_text_file(out / ManifestFile, m.dump(1) + "\n");
    return manifest;
}

std::optional<Report> parse_report(std::string_view name) noexcept
{
    if (name == "paths")
        return Report::paths;
    if (name == "transitions")
        return Report::transitions;
    if (name == "layers")
        return Report::layers;
    if (name == "scaling")
        return Report::scaling;
    if (name == "select")
        return Report::select;
    return std::nullopt;
}

std::vector<fs::path> cmd_analyze(const AnalyzeOptions& options)
{
    if (options.run_dirs.empty())
        throw MissingArtifact("no run directory given");
    auto runs = std::vector<LoadedRun> {};
    for (const auto& dir: options.run_dirs)
        runs.push_back(load_run(dir));
    const auto out = options.out_dir.value_or(options.run_dirs.front() / "analysis");

    auto written = std::vector<fs::path> {};
    switch (options.report)
    {
        case Report::paths: report_paths(runs, options, out, written); break;
        case Report::transitions: report_transitions(runs, out, written); break;
        case Report::layers: report_layers(runs, out, written); break;
        case Report::scaling: report_scaling(runs, options, out, written); break;
        case Report::select: report_select(runs, options, out, written); break;
    }
    return written;
}

ScalingFit cmd_fit(const fs::path& points_csv, const std::optional<fs::path>& out)
{
    auto in = std::ifstream { points_csv };
    if (!in)
        throw MissingArtifact("cannot read '" + points_csv.string() + "'");
    auto points = std::vector<ScalingPoint> {};
    auto line = std::string {};
    for (auto number = 1; std::getline(in, line); ++number)
    {
        if (line.empty())
            continue;
        auto fields = std::istringstream { line };
        auto c = std::string {};
        auto r = std::string {};
        std::getline(fields, c, ',');
        std::getline(fields, r, ',');
        try
        {
            points.push_back({ std::stod(c), std::stod(r) });
        }
        catch (const std::exception&)
        {
            if (number == 1)
                continue;
            throw IoError(points_csv.string() + ":" + std::to_string(number) + ": expected compute,reward");
        }
    }
    const auto fit = fit_scaling_curve(points);
    auto csv = CsvWriter { "a", "b", "c", "rmse", "points" };
    csv.row({ num(fit.a), num(fit.b), num(fit.c), num(fit.rmse), std::to_string(fit.points_used) });
    auto target = out.value_or(fs::path { points_csv }.replace_extension(".fit.csv"));
    io::write_text_file(target, csv.str());
    return fit;
}

json error_report(const std::exception& e)
{
    auto report = json { { "error", "InternalError" }, { "message", e.what() } };
    if (const auto* err = dynamic_cast<const Error*>(&e))
        report["error"] = err->kind();
    if (const auto* cfg = dynamic_cast<const ConfigError*>(&e))
    {
        auto violations = json::array();
        for (const auto& v: cfg->violations())
            violations.push_back({ { "field", v.field }, { "reason", v.reason } });
        report["violations"] = violations;
    }
    return report;
}

int exit_code_for(const std::exception& e) noexcept
{
    if (dynamic_cast<const ConfigError*>(&e))
        return 2;
    if (dynamic_cast<const BackendUnavailable*>(&e) || dynamic_cast<const EmptyCompletion*>(&e)
        || dynamic_cast<const RewardUnavailable*>(&e) || dynamic_cast<const UnparsableMockSample*>(&e))
        return 3;
    if (dynamic_cast<const SearchExhausted*>(&e))
        return 4;
    if (dynamic_cast<const MissingArtifact*>(&e) || dynamic_cast<const IoError*>(&e))
        return 5;
    return 1;
}

} // namespace toa::cli
