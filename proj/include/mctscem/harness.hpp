// harness.hpp -- experiment runner: multi-trial, multi-episode planning
// loops with per-episode model retraining, aggregation and file output.
#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "mctscem/env.hpp"
#include "mctscem/model.hpp"
#include "mctscem/planner.hpp"
#include "mctscem/types.hpp"

namespace mctscem {

struct ExperimentConfig {
    std::string env = "pendulum";
    std::string planner = "mcts-cem";
    int episodes = 10;
    int trials = 5;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string tree_dump_file;  // optional; latest search tree is written here

    PlannerConfig planner_cfg;
    ModelConfig model_cfg;

    void validate() const;
};

struct EpisodeLog {
    int trial = 0;
    int episode = 0;
    std::vector<double> rewards;
    double cumulative = 0.0;
    double duration_ms = 0.0;  // wall clock; never written to deterministic outputs
    double model_loss = 0.0;   // mean member loss after the post-episode retrain
};

// Sets one configuration key (config-file line or CLI override).
// Throws std::invalid_argument on unknown keys or unparseable values.
void set_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Flat "key = value" file with '#' comments.
ExperimentConfig load_config_file(const std::string& path);

using PlannerFactory = std::function<std::unique_ptr<Planner>(
    const TransitionModel& model, const RewardSource& reward, const Bounds& bounds,
    const PlannerConfig& cfg)>;

// Runs trials x episodes with the named planner. Each trial seeds a warmup
// episode of uniform-random actions, trains the ensemble, then alternates
// planned episodes with retraining. Trials run on independent seeds and may
// execute in parallel; per-trial logs are written to out_dir as soon as a
// trial completes.
std::vector<EpisodeLog> run_experiment(const ExperimentConfig& cfg);

// Same loop with an injected planner factory (used by tests).
std::vector<EpisodeLog> run_experiment_with(const ExperimentConfig& cfg,
                                            const PlannerFactory& factory);

struct EpisodeStat {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation across trials
};

// Per-episode mean/std of cumulative reward across trials. The logs must
// cover a full trials x episodes grid.
std::vector<EpisodeStat> aggregate(const std::vector<EpisodeLog>& logs);

// Writes steps.csv, aggregate.csv and summary.json into out_dir.
void emit_results(const std::vector<EpisodeLog>& logs, const std::vector<EpisodeStat>& stats,
                  const ExperimentConfig& cfg, const std::string& out_dir);

// Reads a steps.csv produced by emit_results and recomputes the per-episode
// aggregate rows.
std::vector<EpisodeStat> aggregate_from_csv(const std::string& steps_csv_path);
void write_aggregate_csv(const std::vector<EpisodeStat>& stats, const std::string& path);

// Human-readable summary of a tree dump produced by Tree::dump.
void inspect_tree_dump(std::istream& in, std::ostream& out);

}  // namespace mctscem
