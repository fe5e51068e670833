// Command-line front end: run experiments, aggregate results, inspect
// search-tree dumps.
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mctscem/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::pair<std::string, std::string>>& overrides) {
    mctscem::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = mctscem::load_config_file(config_path);
    for (const auto& [key, value] : overrides) mctscem::set_config_key(cfg, key, value);
    cfg.validate();

    const std::vector<mctscem::EpisodeLog> logs = mctscem::run_experiment(cfg);
    const std::vector<mctscem::EpisodeStat> stats = mctscem::aggregate(logs);
    mctscem::emit_results(logs, stats, cfg, cfg.out_dir);

    std::cout << cfg.planner << " on " << cfg.env << ": " << cfg.trials << " trials x "
              << cfg.episodes << " episodes\n";
    for (std::size_t e = 0; e < stats.size(); ++e) {
        std::cout << "episode " << e << ": mean cumulative " << stats[e].mean << " (std "
                  << stats[e].std << ")\n";
    }
    std::cout << "results written to " << cfg.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model-based planning benchmark: CEM, MCTS-Random and MCTS-CEM planners"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run an experiment");
    std::string config_path;
    std::string env, planner, out_dir;
    int episodes = -1, trials = -1;
    long long seed = -1;
    run->add_option("--config", config_path, "Config file (key = value lines)");
    run->add_option("--env", env, "Environment name (pendulum, sparse-mountain-car)");
    run->add_option("--planner", planner, "Planner name (cem, mcts-random, mcts-cem)");
    run->add_option("--episodes", episodes, "Episodes per trial");
    run->add_option("--trials", trials, "Number of trials");
    run->add_option("--seed", seed, "Base random seed");
    run->add_option("--out", out_dir, "Output directory");

    // aggregate
    auto* agg = app.add_subcommand("aggregate", "Aggregate a run's steps.csv");
    std::string agg_in, agg_out;
    agg->add_option("--in", agg_in, "Run output directory")->required();
    agg->add_option("--out", agg_out, "Aggregate CSV to write")->required();

    // inspect-tree
    auto* inspect = app.add_subcommand("inspect-tree", "Summarize a search-tree dump");
    std::string dump_path;
    inspect->add_option("--in", dump_path, "Tree dump file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            std::vector<std::pair<std::string, std::string>> overrides;
            if (!env.empty()) overrides.emplace_back("env", env);
            if (!planner.empty()) overrides.emplace_back("planner", planner);
            if (episodes >= 0) overrides.emplace_back("episodes", std::to_string(episodes));
            if (trials >= 0) overrides.emplace_back("trials", std::to_string(trials));
            if (seed >= 0) overrides.emplace_back("seed", std::to_string(seed));
            if (!out_dir.empty()) overrides.emplace_back("out_dir", out_dir);
            return cmd_run(config_path, overrides);
        }
        if (agg->parsed()) {
            const auto stats = mctscem::aggregate_from_csv(agg_in + "/steps.csv");
            mctscem::write_aggregate_csv(stats, agg_out);
            std::cout << "wrote " << agg_out << "\n";
            return 0;
        }
        if (inspect->parsed()) {
            std::ifstream is(dump_path);
            if (!is) throw std::runtime_error("cannot open " + dump_path);
            mctscem::inspect_tree_dump(is, std::cout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
