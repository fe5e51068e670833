#include "mctscem/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mctscem {

namespace {

constexpr const char* kLibraryVersion = "0.1.0";

// Stream tags.
constexpr std::uint64_t kTagReset = 0xE5E7;
constexpr std::uint64_t kTagWarmupActions = 0x0AC7;
constexpr std::uint64_t kTagTrain = 0x7A11;
constexpr std::uint64_t kTagPlan = 0x9141;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

int parse_int(const std::string& v) {
    std::size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("expected an integer, got '" + v + "'");
    return out;
}

double parse_double(const std::string& v) {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("expected a number, got '" + v + "'");
    return out;
}

double mean_final_loss(const std::vector<std::vector<double>>& traces) {
    if (traces.empty()) return 0.0;
    double sum = 0.0;
    int count = 0;
    for (const auto& trace : traces) {
        if (trace.empty()) continue;
        sum += trace.back();
        ++count;
    }
    return count > 0 ? sum / count : 0.0;
}

void write_step_rows(std::ostream& os, const EpisodeLog& log) {
    double cumulative = 0.0;
    for (std::size_t step = 0; step < log.rewards.size(); ++step) {
        cumulative += log.rewards[step];
        os << log.trial << ',' << log.episode << ',' << step << ','
           << format_double(log.rewards[step]) << ',' << format_double(cumulative) << '\n';
    }
}

struct TrialResult {
    std::vector<EpisodeLog> logs;
    std::string tree_dump;  // most recent tree if requested
};

}  // namespace

void ExperimentConfig::validate() const {
    if (episodes < 1) throw std::invalid_argument("config: episodes must be >= 1");
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    make_env(env);  // throws on unknown name
    if (!is_known_planner(planner)) throw std::invalid_argument("unknown planner: " + planner);
    planner_cfg.validate();
}

void set_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    PlannerConfig& p = cfg.planner_cfg;
    ModelConfig& m = cfg.model_cfg;
    if (key == "env") cfg.env = value;
    else if (key == "planner") cfg.planner = value;
    else if (key == "episodes") cfg.episodes = parse_int(value);
    else if (key == "trials") cfg.trials = parse_int(value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "tree_dump_file") cfg.tree_dump_file = value;
    else if (key == "horizon") p.horizon = parse_int(value);
    else if (key == "n_candidates") p.n_candidates = parse_int(value);
    else if (key == "k_elite") p.k_elite = parse_int(value);
    else if (key == "cem_iters") p.cem_iters = parse_int(value);
    else if (key == "lambda") p.lambda = parse_double(value);
    else if (key == "gamma") p.gamma = parse_double(value);
    else if (key == "n_sim") p.n_sim = parse_int(value);
    else if (key == "n_children") p.n_children = parse_int(value);
    else if (key == "c_ucb") p.c_ucb = parse_double(value);
    else if (key == "rollout_horizon") p.rollout_horizon = parse_int(value);
    else if (key == "max_depth") p.max_depth = parse_int(value);
    else if (key == "knn_k") p.knn_k = parse_int(value);
    else if (key == "ensemble_m") p.ensemble_m = parse_int(value);
    else if (key == "ev_samples") p.ev_samples = parse_int(value);
    else if (key == "var_floor") p.var_floor = parse_double(value);
    else if (key == "reward_mode") {
        if (value == "oracle") p.reward_mode = RewardMode::oracle;
        else if (value == "learned") p.reward_mode = RewardMode::learned;
        else throw std::invalid_argument("reward_mode must be 'oracle' or 'learned'");
    } else if (key == "propagation") {
        if (value == "mean") p.propagation = Propagation::mean;
        else if (value == "sample") p.propagation = Propagation::sample;
        else throw std::invalid_argument("propagation must be 'mean' or 'sample'");
    } else if (key == "warm_start") p.warm_start = parse_bool(value);
    else if (key == "clamp_ev") p.clamp_ev = parse_bool(value);
    else if (key == "rollout_intrinsic") p.rollout_intrinsic = parse_bool(value);
    else if (key == "hidden") m.hidden = parse_int(value);
    else if (key == "learning_rate") m.learning_rate = parse_double(value);
    else if (key == "epochs") m.epochs = parse_int(value);
    else if (key == "batch_size") m.batch_size = parse_int(value);
    else if (key == "buffer_capacity") m.buffer_capacity = static_cast<std::size_t>(std::stoull(value));
    else throw std::invalid_argument("unknown config key: " + key);
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            set_config_key(cfg, key, value);
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

namespace {

TrialResult run_trial(const ExperimentConfig& cfg, const PlannerFactory& factory, int trial) {
    TrialResult result;
    RngStream master(cfg.seed + static_cast<std::uint64_t>(trial));

    auto env = make_env(cfg.env);
    const EnvSpec& spec = env->spec();

    EnsembleModel model(spec.d_s, spec.d_a, cfg.planner_cfg.ensemble_m, cfg.planner_cfg.var_floor,
                        cfg.model_cfg, master.child(0x5EED).key());
    ReplayBuffer buffer(cfg.model_cfg.buffer_capacity);

    OracleReward oracle(*env);
    LearnedReward learned(model);
    const RewardSource& reward =
        cfg.planner_cfg.reward_mode == RewardMode::oracle
            ? static_cast<const RewardSource&>(oracle)
            : static_cast<const RewardSource&>(learned);

    // Warmup episode: uniform-random actions seed the buffer before the
    // first training pass.
    {
        RngStream reset_rng = master.child(kTagReset, 0);
        RngStream action_rng = master.child(kTagWarmupActions);
        State s = env->reset(reset_rng);
        for (;;) {
            Vec a(spec.d_a);
            for (int j = 0; j < spec.d_a; ++j)
                a(j) = action_rng.uniform(spec.action_bounds.lo(j), spec.action_bounds.hi(j));
            const Action action{a};
            const StepResult sr = env->step(action);
            buffer.push(Transition{s, action, sr.next_state, sr.reward, sr.done});
            s = sr.next_state;
            if (sr.done) break;
        }
    }
    model.train(buffer, cfg.model_cfg.epochs, master.child(kTagTrain, 0));

    std::unique_ptr<Planner> planner =
        factory(model, reward, spec.action_bounds, cfg.planner_cfg);

    result.logs.reserve(static_cast<std::size_t>(cfg.episodes));
    for (int episode = 0; episode < cfg.episodes; ++episode) {
        const auto start = std::chrono::steady_clock::now();

        RngStream reset_rng = master.child(kTagReset, static_cast<std::uint64_t>(episode) + 1);
        State s = env->reset(reset_rng);

        EpisodeLog log;
        log.trial = trial;
        log.episode = episode;

        for (int step = 0;; ++step) {
            const Action a = planner->plan(
                s, master.child(kTagPlan, static_cast<std::uint64_t>(episode),
                                static_cast<std::uint64_t>(step)));
            const StepResult sr = env->step(a);
            buffer.push(Transition{s, a, sr.next_state, sr.reward, sr.done});
            log.rewards.push_back(sr.reward);
            s = sr.next_state;
            if (sr.done) break;
        }
        log.cumulative = 0.0;
        for (double r : log.rewards) log.cumulative += r;

        const auto traces =
            model.train(buffer, cfg.model_cfg.epochs,
                        master.child(kTagTrain, static_cast<std::uint64_t>(episode) + 1));
        log.model_loss = mean_final_loss(traces);
        log.duration_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start)
                              .count();
        result.logs.push_back(std::move(log));

        if (!cfg.tree_dump_file.empty() && planner->last_tree() != nullptr) {
            std::ostringstream os;
            planner->last_tree()->dump(os);
            result.tree_dump = os.str();
        }
    }
    return result;
}

}  // namespace

std::vector<EpisodeLog> run_experiment_with(const ExperimentConfig& cfg,
                                            const PlannerFactory& factory) {
    cfg.planner_cfg.validate();
    if (cfg.episodes < 1) throw std::invalid_argument("config: episodes must be >= 1");
    if (cfg.trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    make_env(cfg.env);  // reject unknown names before any work

    std::filesystem::create_directories(cfg.out_dir);

    std::vector<TrialResult> results(static_cast<std::size_t>(cfg.trials));

#pragma omp parallel for schedule(dynamic, 1)
    for (int trial = 0; trial < cfg.trials; ++trial) {
        TrialResult r = run_trial(cfg, factory, trial);

        // Write this trial's rows as soon as it finishes so interrupted
        // runs keep completed trials.
        char name[64];
        std::snprintf(name, sizeof(name), "trial_%03d.csv", trial);
        std::ofstream os(std::filesystem::path(cfg.out_dir) / name);
        os << "trial,episode,step,reward,cumulative\n";
        for (const EpisodeLog& log : r.logs) write_step_rows(os, log);

        results[static_cast<std::size_t>(trial)] = std::move(r);
    }

    if (!cfg.tree_dump_file.empty()) {
        for (const TrialResult& r : results) {
            if (!r.tree_dump.empty()) {
                std::ofstream os(cfg.tree_dump_file);
                os << r.tree_dump;
                break;
            }
        }
    }

    std::vector<EpisodeLog> logs;
    logs.reserve(static_cast<std::size_t>(cfg.trials * cfg.episodes));
    for (TrialResult& r : results)
        for (EpisodeLog& log : r.logs) logs.push_back(std::move(log));
    return logs;
}

std::vector<EpisodeLog> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string planner_name = cfg.planner;
    return run_experiment_with(cfg, [&planner_name](const TransitionModel& model,
                                                    const RewardSource& reward, const Bounds& bounds,
                                                    const PlannerConfig& pcfg) {
        return make_planner(planner_name, model, reward, bounds, pcfg);
    });
}

std::vector<EpisodeStat> aggregate(const std::vector<EpisodeLog>& logs) {
    if (logs.empty()) throw std::invalid_argument("aggregate: no logs");

    int max_trial = 0, max_episode = 0;
    for (const EpisodeLog& log : logs) {
        max_trial = std::max(max_trial, log.trial);
        max_episode = std::max(max_episode, log.episode);
    }
    const int trials = max_trial + 1;
    const int episodes = max_episode + 1;

    std::vector<std::vector<double>> grid(static_cast<std::size_t>(episodes));
    for (auto& row : grid) row.assign(static_cast<std::size_t>(trials), std::nan(""));
    for (const EpisodeLog& log : logs) {
        double& cell = grid[static_cast<std::size_t>(log.episode)][static_cast<std::size_t>(log.trial)];
        if (!std::isnan(cell)) throw std::invalid_argument("aggregate: duplicate (trial, episode)");
        cell = log.cumulative;
    }

    std::vector<EpisodeStat> stats(static_cast<std::size_t>(episodes));
    for (int e = 0; e < episodes; ++e) {
        const auto& row = grid[static_cast<std::size_t>(e)];
        double sum = 0.0;
        for (double v : row) {
            if (std::isnan(v)) throw std::invalid_argument("aggregate: ragged trials x episodes grid");
            sum += v;
        }
        const double mean = sum / trials;
        double sq = 0.0;
        for (double v : row) sq += (v - mean) * (v - mean);
        stats[static_cast<std::size_t>(e)] = EpisodeStat{mean, std::sqrt(sq / trials)};
    }
    return stats;
}

namespace {

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    const PlannerConfig& p = cfg.planner_cfg;
    const ModelConfig& m = cfg.model_cfg;
    nlohmann::ordered_json j;
    j["env"] = cfg.env;
    j["planner"] = cfg.planner;
    j["episodes"] = cfg.episodes;
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["tree_dump_file"] = cfg.tree_dump_file;
    j["horizon"] = p.horizon;
    j["n_candidates"] = p.n_candidates;
    j["k_elite"] = p.k_elite;
    j["cem_iters"] = p.cem_iters;
    j["lambda"] = p.lambda;
    j["gamma"] = p.gamma;
    j["n_sim"] = p.n_sim;
    j["n_children"] = p.n_children;
    j["c_ucb"] = p.c_ucb;
    j["rollout_horizon"] = p.rollout_horizon;
    j["max_depth"] = p.max_depth;
    j["knn_k"] = p.knn_k;
    j["ensemble_m"] = p.ensemble_m;
    j["ev_samples"] = p.ev_samples;
    j["var_floor"] = p.var_floor;
    j["reward_mode"] = p.reward_mode == RewardMode::oracle ? "oracle" : "learned";
    j["propagation"] = p.propagation == Propagation::mean ? "mean" : "sample";
    j["warm_start"] = p.warm_start;
    j["clamp_ev"] = p.clamp_ev;
    j["rollout_intrinsic"] = p.rollout_intrinsic;
    j["hidden"] = m.hidden;
    j["learning_rate"] = m.learning_rate;
    j["epochs"] = m.epochs;
    j["batch_size"] = m.batch_size;
    j["buffer_capacity"] = m.buffer_capacity;
    return j;
}

}  // namespace

void emit_results(const std::vector<EpisodeLog>& logs, const std::vector<EpisodeStat>& stats,
                  const ExperimentConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out_dir + ": " + ec.message());

    const fs::path dir(out_dir);
    {
        const fs::path path = dir / "steps.csv";
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write " + path.string());
        os << "trial,episode,step,reward,cumulative\n";
        for (const EpisodeLog& log : logs) write_step_rows(os, log);
        if (!os) throw std::runtime_error("write failed: " + path.string());
    }
    write_aggregate_csv(stats, (dir / "aggregate.csv").string());
    {
        const fs::path path = dir / "summary.json";
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write " + path.string());
        nlohmann::ordered_json j;
        j["version"] = kLibraryVersion;
        j["config"] = config_to_json(cfg);
        nlohmann::ordered_json episodes = nlohmann::ordered_json::array();
        for (const EpisodeLog& log : logs) {
            nlohmann::ordered_json e;
            e["trial"] = log.trial;
            e["episode"] = log.episode;
            e["cumulative"] = log.cumulative;
            e["model_loss"] = log.model_loss;
            episodes.push_back(std::move(e));
        }
        j["episodes"] = std::move(episodes);
        os << j.dump(2) << '\n';
        if (!os) throw std::runtime_error("write failed: " + path.string());
    }
}

std::vector<EpisodeStat> aggregate_from_csv(const std::string& steps_csv_path) {
    std::ifstream is(steps_csv_path);
    if (!is) throw std::runtime_error("cannot open " + steps_csv_path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty csv: " + steps_csv_path);

    // Accumulate per (trial, episode) reward sums.
    std::map<std::pair<int, int>, double> totals;
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 5)
            throw std::runtime_error("malformed csv row in " + steps_csv_path + ": " + line);
        const int trial = parse_int(fields[0]);
        const int episode = parse_int(fields[1]);
        totals[{trial, episode}] += parse_double(fields[3]);
    }

    std::vector<EpisodeLog> logs;
    logs.reserve(totals.size());
    for (const auto& [key, total] : totals) {
        EpisodeLog log;
        log.trial = key.first;
        log.episode = key.second;
        log.cumulative = total;
        logs.push_back(std::move(log));
    }
    return aggregate(logs);
}

void write_aggregate_csv(const std::vector<EpisodeStat>& stats, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "episode,mean,std\n";
    for (std::size_t e = 0; e < stats.size(); ++e)
        os << e << ',' << format_double(stats[e].mean) << ',' << format_double(stats[e].std) << '\n';
    if (!os) throw std::runtime_error("write failed: " + path);
}

void inspect_tree_dump(std::istream& in, std::ostream& out) {
    struct Row {
        int id = 0, parent = -1, depth = 0, visits = 0;
        double q = 0.0;
        std::vector<double> action;
    };
    std::vector<Row> rows;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Row r;
        if (!(ss >> r.id >> r.parent >> r.depth >> r.visits >> r.q))
            throw std::runtime_error("malformed tree dump line: " + line);
        double a;
        while (ss >> a) r.action.push_back(a);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::runtime_error("tree dump contains no nodes");

    int max_depth = 0;
    for (const Row& r : rows) max_depth = std::max(max_depth, r.depth);
    out << "nodes: " << rows.size() << "\n";
    out << "max depth: " << max_depth << "\n";
    out << "root visits: " << rows.front().visits << "\n";

    std::vector<const Row*> root_children;
    for (const Row& r : rows)
        if (r.parent == 0) root_children.push_back(&r);
    std::stable_sort(root_children.begin(), root_children.end(),
                     [](const Row* a, const Row* b) { return a->visits > b->visits; });
    out << "root children (by visits):\n";
    for (const Row* r : root_children) {
        out << "  id " << r->id << "  N " << r->visits << "  Q " << r->q << "  action [";
        for (std::size_t j = 0; j < r->action.size(); ++j)
            out << (j > 0 ? " " : "") << r->action[j];
        out << "]\n";
    }
}

}  // namespace mctscem
