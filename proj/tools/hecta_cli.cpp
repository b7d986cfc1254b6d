// Command-line front end: gen, train, eval, robust, trace, plot.
//
// Exit codes: 0 success, 2 usage, 3 input error, 4 numerical abort.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hecta/checkpoint.hpp"
#include "hecta/learning.hpp"
#include "hecta/svg_plot.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hecta;

namespace {

constexpr const char* kCodeVersion = "hecta 0.1.0";
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumerical = 4;

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

fs::path output_root() {
    const char* env = std::getenv("HECTA_OUT");
    return env && *env ? fs::path(env) : fs::path("hecta_out");
}

fs::path resolve_out(const std::string& requested, const std::string& verb) {
    if (requested.empty()) return output_root() / verb;
    const fs::path p(requested);
    return p.is_absolute() ? p : output_root() / p;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << content;
}

ScenarioSpec load_scenario_arg(const std::string& arg) {
    if (fs::exists(arg)) return load_scenario_file(arg);
    if (arg == "zhongfu") return zhongfu_scenario();
    if (arg == "desk") return desk_scenario();
    throw InputError("no scenario file '" + arg + "'");
}

// One manifest per output directory: enough to rerun the command bit-exactly.
class Manifest {
public:
    Manifest(std::string verb, std::vector<std::string> args) : start_(std::chrono::steady_clock::now()) {
        doc_["command"] = std::move(verb);
        doc_["args"] = std::move(args);
        doc_["cwd"] = fs::current_path().string();
        doc_["code_version"] = kCodeVersion;
        doc_["config"] = json::object();
        doc_["seeds"] = json::array();
        doc_["outputs"] = json::array();
    }

    json& config() { return doc_["config"]; }
    void seed(std::uint64_t s) { doc_["seeds"].push_back(s); }
    void scenario(const ScenarioSpec& spec) { doc_["scenario_hash"] = scenario_hash(spec); }
    void output(const fs::path& p) { doc_["outputs"].push_back(p.filename().string()); }
    void output_relative(const std::string& rel) { doc_["outputs"].push_back(rel); }

    void write(const fs::path& dir) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        doc_["wall_clock_seconds"] = secs;
        write_file(dir / "manifest.json", doc_.dump(2) + "\n");
    }

private:
    json doc_;
    std::chrono::steady_clock::time_point start_;
};

struct PolicyChoice {
    std::string kind = "greedy";
    std::string checkpoint;
    std::string mode = "greedy-exec";
    double epsilon = 0.05;
    std::string variant;  // empty: from checkpoint metadata, else hard
};

void add_policy_options(CLI::App* cmd, PolicyChoice& p) {
    cmd->add_option("--policy", p.kind, "greedy | random | checkpoint")
        ->check(CLI::IsMember({"greedy", "random", "checkpoint"}));
    cmd->add_option("--checkpoint", p.checkpoint, "Checkpoint file for --policy checkpoint");
    cmd->add_option("--mode", p.mode, "greedy-exec | stochastic")->check(CLI::IsMember({"greedy-exec", "stochastic"}));
    cmd->add_option("--epsilon", p.epsilon, "Exploration rate in stochastic mode");
    cmd->add_option("--variant", p.variant, "hard | voluntary")->check(CLI::IsMember({"hard", "voluntary"}));
}

// Owns whatever a learned policy references.
struct LoadedPolicy {
    std::unique_ptr<TrainState> state;
    std::unique_ptr<Model> model;
    std::unique_ptr<Policy> policy;
    bool hard_cooperative = true;
};

LoadedPolicy make_policy(const PolicyChoice& choice, const ScenarioSpec& spec, json& config) {
    LoadedPolicy lp;
    config["policy"] = choice.kind;
    if (choice.kind == "greedy") {
        lp.policy = std::make_unique<GreedyPolicy>();
    } else if (choice.kind == "random") {
        lp.policy = std::make_unique<RandomPolicy>();
    } else {
        if (choice.checkpoint.empty()) throw CLI::ValidationError("--checkpoint", "required with --policy checkpoint");
        const Checkpoint ckp = load_checkpoint(choice.checkpoint);
        lp.state = std::make_unique<TrainState>(train_state_from(ckp));
        const ModelConfig& mc = lp.state->model;
        lp.model = std::make_unique<Model>(mc);
        if (ModelConfig::for_scenario(spec).agent_classes != mc.agent_classes || spec.grid_height != mc.grid_height ||
            spec.grid_width != mc.grid_width)
            throw InputError("scenario layout does not match the checkpoint");
        const double eps = choice.mode == "greedy-exec" ? 0.0 : choice.epsilon;
        lp.policy = std::make_unique<LearnedPolicy>(*lp.model, lp.state->params, eps);
        auto it = ckp.metadata.find("train.hard_cooperative");
        if (it != ckp.metadata.end()) lp.hard_cooperative = it->second == "1";
        config["checkpoint"] = choice.checkpoint;
        config["mode"] = choice.mode;
        config["epsilon"] = eps;
    }
    if (!choice.variant.empty()) lp.hard_cooperative = choice.variant == "hard";
    config["hard_cooperative"] = lp.hard_cooperative;
    return lp;
}

std::string fixed6(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(6) << v;
    return out.str();
}

// ---------------------------------------------------------------------------

struct GenArgs {
    std::string preset;
    std::uint64_t seed = 1;
    int count = 1;
};

int cmd_gen(const GenArgs& a, const fs::path& out, Manifest& m) {
    if (!preset_params(a.preset)) throw CLI::ValidationError("--preset", "unknown preset '" + a.preset + "'");
    if (a.count < 1) throw CLI::ValidationError("--count", "must be at least 1");
    m.config() = {{"preset", a.preset}, {"seed", a.seed}, {"count", a.count}};
    for (int i = 0; i < a.count; ++i) {
        ScenarioSpec spec;
        std::string name;
        if (a.preset == "zhongfu" || a.preset == "desk") {
            spec = a.preset == "zhongfu" ? zhongfu_scenario() : desk_scenario();
            name = a.preset + ".scn";
            if (a.count > 1) throw CLI::ValidationError("--count", "bundled scenarios are single files");
        } else {
            spec = generate_scenario(*preset_params(a.preset), a.seed + i);
            name = a.preset + "-s" + std::to_string(a.seed + i) + ".scn";
        }
        m.seed(spec.seed);
        save_scenario_file(spec, (out / name).string());
        m.output(out / name);
        std::cout << (out / name).string() << ": " << spec.grid_width << "x" << spec.grid_height << ", "
                  << spec.tasks.size() << " tasks, " << spec.entities.size() << " entities, "
                  << spec.obstacles.size() << " obstacles\n";
        if (a.count == 1) m.scenario(spec);
    }
    return 0;
}

struct TrainArgs {
    std::string scenario;
    std::string variant = "hard";
    std::string ablate = "none";
    TrainConfig cfg;
};

json train_config_json(const TrainConfig& c) {
    return {{"episodes", c.episodes},
            {"time_limit", c.time_limit},
            {"gamma", c.gamma},
            {"lr0", c.lr0},
            {"lr_decay_rate", c.lr_decay_rate},
            {"lr_decay_interval", c.lr_decay_interval},
            {"epsilon_start", c.epsilon_start},
            {"epsilon_end", c.epsilon_end},
            {"epsilon_decay_fraction", c.epsilon_decay_fraction},
            {"batch_size", c.batch_size},
            {"buffer_capacity", c.buffer_capacity},
            {"target_sync", c.target_sync},
            {"lambda_opt", c.lambda_opt},
            {"lambda_nopt", c.lambda_nopt},
            {"clip", c.clip},
            {"rms_alpha", c.rms_alpha},
            {"rms_eps", c.rms_eps},
            {"seed", c.seed},
            {"train_steps_per_episode", c.train_steps_per_episode},
            {"hard_cooperative", c.hard_cooperative},
            {"ablate_eiem", c.ablate_eiem},
            {"ablate_sedm", c.ablate_sedm},
            {"v_grad_to_hidden", c.v_grad_to_hidden},
            {"checkpoint_every", c.checkpoint_every}};
}

int cmd_train(TrainArgs a, const fs::path& out, Manifest& m) {
    const ScenarioSpec spec = load_scenario_arg(a.scenario);
    a.cfg.hard_cooperative = a.variant == "hard";
    a.cfg.ablate_eiem = a.ablate == "eiem";
    a.cfg.ablate_sedm = a.ablate == "sedm";
    try {
        a.cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw CLI::ValidationError("train", e.what());
    }
    m.scenario(spec);
    m.seed(a.cfg.seed);
    m.config() = train_config_json(a.cfg);
    m.config()["scenario"] = a.scenario;

    std::ofstream metrics(out / "metrics.csv");
    if (!metrics) throw InputError("cannot write metrics");
    metrics << kMetricsHeader << "\n";
    m.output(out / "metrics.csv");
    if (a.cfg.checkpoint_every > 0) fs::create_directories(out / "checkpoints");

    TrainHooks hooks;
    hooks.on_metrics = [&](const MetricsRow& row) {
        metrics << format_metrics_row(row) << "\n";
        if (row.episode % 100 == 0 || row.episode == a.cfg.episodes) {
            metrics.flush();
            std::cerr << "episode " << row.episode << "/" << a.cfg.episodes << " tcr " << row.tcr << " eps "
                      << row.epsilon << "\n";
        }
    };
    hooks.on_checkpoint = [&](int episode, const TrainState& st) {
        const std::string rel = "checkpoints/ckpt-" + std::to_string(episode) + ".ckpt";
        save_checkpoint(make_checkpoint(st, a.cfg, episode), (out / rel).string());
        m.output_relative(rel);
    };

    TrainResult result;
    try {
        result = run_training(spec, a.cfg, hooks);
    } catch (const NumericalAbort& e) {
        metrics.flush();
        write_file(out / "abort_dump.txt", e.dump());
        m.output(out / "abort_dump.txt");
        m.write(out);
        std::cerr << "numerical abort: " << e.what() << " (dump in " << (out / "abort_dump.txt").string() << ")\n";
        return kExitNumerical;
    }
    metrics.close();
    save_checkpoint(make_checkpoint(result.state, a.cfg, a.cfg.episodes), (out / "checkpoint.ckpt").string());
    m.output(out / "checkpoint.ckpt");
    std::cout << "trained " << a.cfg.episodes << " episodes, " << result.train_steps << " optimizer steps";
    if (result.skipped_steps) std::cout << ", " << result.skipped_steps << " skipped";
    std::cout << "\n" << (out / "checkpoint.ckpt").string() << "\n";
    return 0;
}

struct EvalArgs {
    std::string scenario;
    PolicyChoice policy;
    int seeds = 10;
    std::uint64_t seed = 1;
    int time_limit = 0;
    std::vector<int> time_limits;
};

int cmd_eval(const EvalArgs& a, const fs::path& out, Manifest& m) {
    const ScenarioSpec base = load_scenario_arg(a.scenario);
    if (a.seeds < 1) throw CLI::ValidationError("--seeds", "must be at least 1");
    m.scenario(base);
    auto& cfg = m.config();
    LoadedPolicy lp = make_policy(a.policy, base, cfg);
    std::vector<int> limits = a.time_limits;
    if (limits.empty()) limits.push_back(a.time_limit > 0 ? a.time_limit : base.time_limit);
    for (int t : limits)
        if (t < 1) throw CLI::ValidationError("--time-limits", "time limits must be positive");
    cfg["scenario"] = a.scenario;
    cfg["seeds"] = a.seeds;
    cfg["time_limits"] = limits;
    for (int i = 0; i < a.seeds; ++i) m.seed(a.seed + i);

    std::ostringstream csv;
    csv << "policy,time_limit,n,mean,std,ci95\n";
    std::cout << std::left << std::setw(12) << "policy" << std::setw(12) << "time_limit" << "TCR (mean +- 95% CI)\n";
    for (int t : limits) {
        ScenarioSpec spec = base;
        spec.time_limit = t;
        const TcrStats s = evaluate_policy(*lp.policy, spec, a.seeds, a.seed, lp.hard_cooperative);
        csv << a.policy.kind << "," << t << "," << a.seeds << "," << fixed6(s.mean) << "," << fixed6(s.stddev) << ","
            << fixed6(s.ci95) << "\n";
        std::cout << std::left << std::setw(12) << a.policy.kind << std::setw(12) << t << fixed6(s.mean) << " +- "
                  << fixed6(s.ci95) << "\n";
    }
    write_file(out / "eval.csv", csv.str());
    m.output(out / "eval.csv");
    return 0;
}

struct RobustArgs {
    std::string scenario;
    PolicyChoice policy;
    std::vector<std::string> kinds;
    int variants = 50;
    std::uint64_t seed = 1;
};

int cmd_robust(const RobustArgs& a, const fs::path& out, Manifest& m) {
    const ScenarioSpec base = load_scenario_arg(a.scenario);
    m.scenario(base);
    auto& cfg = m.config();
    LoadedPolicy lp = make_policy(a.policy, base, cfg);
    std::vector<VariationKind> kinds;
    if (a.kinds.empty() || (a.kinds.size() == 1 && a.kinds[0] == "all")) {
        kinds = all_variation_kinds();
    } else {
        for (const auto& k : a.kinds) {
            try {
                kinds.push_back(parse_variation_kind(k));
            } catch (const std::exception&) {
                throw CLI::ValidationError("--kinds", "unknown variation kind '" + k + "'");
            }
        }
    }
    if (a.variants < 0) throw CLI::ValidationError("--variants", "must be non-negative");
    cfg["scenario"] = a.scenario;
    cfg["variants"] = a.variants;
    json names = json::array();
    for (auto k : kinds) names.push_back(std::string(to_string(k)));
    cfg["kinds"] = names;
    m.seed(a.seed);

    const auto rows = robustness_sweep(*lp.policy, base, kinds, a.variants, a.seed, lp.hard_cooperative);
    std::ostringstream csv;
    csv << "kind,n,mean,std,ci95\n";
    for (const auto& r : rows) {
        csv << to_string(r.kind) << "," << r.stats.values.size() << "," << fixed6(r.stats.mean) << ","
            << fixed6(r.stats.stddev) << "," << fixed6(r.stats.ci95) << "\n";
        std::cout << std::left << std::setw(20) << to_string(r.kind) << fixed6(r.stats.mean) << "\n";
    }
    write_file(out / "robust.csv", csv.str());
    m.output(out / "robust.csv");
    return 0;
}

struct TraceArgs {
    std::string scenario;
    PolicyChoice policy;
    std::uint64_t seed = 1;
    int time_limit = 0;
    bool planes = false;
};

int cmd_trace(const TraceArgs& a, const fs::path& out, Manifest& m) {
    ScenarioSpec spec = load_scenario_arg(a.scenario);
    if (a.time_limit > 0) spec.time_limit = a.time_limit;
    m.scenario(spec);
    auto& cfg = m.config();
    LoadedPolicy lp = make_policy(a.policy, spec, cfg);
    cfg["scenario"] = a.scenario;
    cfg["time_limit"] = spec.time_limit;
    m.seed(a.seed);

    std::ofstream csv(out / "trajectory.csv");
    if (!csv) throw InputError("cannot write trajectory");
    TrajectoryWriter writer(csv);
    Rng rng(a.seed);
    const RolloutResult r = rollout(spec, *lp.policy, rng, lp.hard_cooperative, nullptr, &writer);
    csv.close();
    m.output(out / "trajectory.csv");
    if (a.planes) {
        std::ofstream planes(out / "planes.csv");
        const World world(spec, lp.hard_cooperative);
        const auto g = encode_global(world);
        dump_planes_csv(planes, g.planes, kGlobalChannels, g.height, g.width);
        m.output(out / "planes.csv");
    }
    std::cout << "steps " << r.steps << ", return " << r.episode_return << ", TCR " << fixed6(r.tcr) << "\n";
    return 0;
}

struct PlotArgs {
    std::string metrics;
    std::string eval;
    std::string trajectory;
    std::string scenario;
    int window = 200;
};

plot::CsvTable read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return plot::read_csv(in);
}

int cmd_plot(const PlotArgs& a, const fs::path& out, Manifest& m) {
    if (a.metrics.empty() && a.eval.empty() && a.trajectory.empty())
        throw CLI::ValidationError("plot", "give --metrics, --eval or --trajectory");
    m.config() = {{"metrics", a.metrics}, {"eval", a.eval}, {"trajectory", a.trajectory},
                  {"scenario", a.scenario}, {"window", a.window}};
    if (!a.metrics.empty()) {
        write_file(out / "training_curve.svg", plot::training_curve(read_table(a.metrics), a.window));
        m.output(out / "training_curve.svg");
    }
    if (!a.eval.empty()) {
        const auto t = read_table(a.eval);
        const auto mean = t.numbers("mean"), ci = t.numbers("ci95");
        const int pc = t.column("policy"), tc = t.column("time_limit");
        std::vector<plot::Bar> bars;
        for (std::size_t i = 0; i < t.rows.size(); ++i)
            bars.push_back({t.rows[i][pc] + " T=" + t.rows[i][tc], mean[i], ci[i]});
        write_file(out / "eval_bars.svg", plot::bar_chart("Task completion rate", "TCR", bars));
        m.output(out / "eval_bars.svg");
    }
    if (!a.trajectory.empty()) {
        if (a.scenario.empty()) throw CLI::ValidationError("--scenario", "required with --trajectory");
        const ScenarioSpec spec = load_scenario_arg(a.scenario);
        m.scenario(spec);
        write_file(out / "trajectory.svg", plot::trajectory_overlay(spec, read_table(a.trajectory)));
        m.output(out / "trajectory.svg");
    }
    return 0;
}

// ---------------------------------------------------------------------------

// Drops "--out X" / "--out=X" so the manifest records only what shapes the result.
std::vector<std::string> strip_out(const std::vector<std::string>& args, std::string& out) {
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--out" && i + 1 < args.size()) {
            out = args[++i];
        } else if (args[i].rfind("--out=", 0) == 0) {
            out = args[i].substr(6);
        } else {
            kept.push_back(args[i]);
        }
    }
    return kept;
}

int dispatch(const std::vector<std::string>& raw_args) {
    std::string out_arg;
    const std::vector<std::string> args = strip_out(raw_args, out_arg);

    CLI::App app{"Emergency-rescue crowdsensing simulator and multi-agent trainer"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");
    app.footer(
        "Every subcommand also takes --out DIR. Relative DIR resolves under $HECTA_OUT (default ./hecta_out);\n"
        "without --out, results go to $HECTA_OUT/<subcommand>.");
    std::string replay;
    app.add_option("--replay", replay, "Rerun the command recorded in a manifest");

    GenArgs gen;
    auto* c_gen = app.add_subcommand("gen", "Generate scenario files");
    c_gen->add_option("--preset", gen.preset, "sce1..sce10[-v], zhongfu, desk")->required();
    c_gen->add_option("--seed", gen.seed, "Generation seed");
    c_gen->add_option("--count", gen.count, "Number of consecutive seeds");

    TrainArgs train;
    auto& tc = train.cfg;
    auto* c_train = app.add_subcommand("train", "Train the multi-agent value-decomposition learner");
    c_train->add_option("--scenario", train.scenario, "Scenario file (or zhongfu / desk)")->required();
    c_train->add_option("--episodes", tc.episodes, "Training episodes")->capture_default_str();
    c_train->add_option("--seed", tc.seed, "Run seed")->capture_default_str();
    c_train->add_option("--time-limit", tc.time_limit, "Override the scenario time limit");
    c_train->add_option("--gamma", tc.gamma, "Discount factor")->capture_default_str();
    c_train->add_option("--lr0", tc.lr0, "Initial learning rate")->capture_default_str();
    c_train->add_option("--lr-decay-rate", tc.lr_decay_rate, "Multiplicative lr decay")->capture_default_str();
    c_train->add_option("--lr-decay-interval", tc.lr_decay_interval, "Episodes per lr decay")->capture_default_str();
    c_train->add_option("--epsilon-start", tc.epsilon_start)->capture_default_str();
    c_train->add_option("--epsilon-end", tc.epsilon_end)->capture_default_str();
    c_train->add_option("--epsilon-decay-fraction", tc.epsilon_decay_fraction,
                        "Share of episodes over which epsilon anneals")
        ->capture_default_str();
    c_train->add_option("--batch-size", tc.batch_size)->capture_default_str();
    c_train->add_option("--buffer-capacity", tc.buffer_capacity)->capture_default_str();
    c_train->add_option("--target-sync", tc.target_sync, "Episodes between target syncs")->capture_default_str();
    c_train->add_option("--lambda-opt", tc.lambda_opt)->capture_default_str();
    c_train->add_option("--lambda-nopt", tc.lambda_nopt)->capture_default_str();
    c_train->add_option("--clip", tc.clip, "Global gradient-norm clip")->capture_default_str();
    c_train->add_option("--rms-alpha", tc.rms_alpha)->capture_default_str();
    c_train->add_option("--rms-eps", tc.rms_eps)->capture_default_str();
    c_train->add_option("--train-steps-per-episode", tc.train_steps_per_episode)->capture_default_str();
    c_train->add_flag("--v-grad-to-hidden", tc.v_grad_to_hidden, "Let V's gradient reach the agent networks");
    c_train->add_flag("--record-snapshots", tc.record_snapshots, "Keep q/hidden snapshots in replay");
    c_train->add_option("--checkpoint-every", tc.checkpoint_every, "Episodes between checkpoints (0: final only)");
    c_train->add_option("--variant", train.variant, "hard | voluntary")->check(CLI::IsMember({"hard", "voluntary"}));
    c_train->add_option("--ablate", train.ablate, "none | eiem | sedm")
        ->check(CLI::IsMember({"none", "eiem", "sedm"}));

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "Evaluate a policy's task completion rate");
    c_eval->add_option("--scenario", eval.scenario, "Scenario file (or zhongfu / desk)")->required();
    add_policy_options(c_eval, eval.policy);
    c_eval->add_option("--seeds", eval.seeds, "Number of evaluation runs")->capture_default_str();
    c_eval->add_option("--seed", eval.seed, "First evaluation seed")->capture_default_str();
    c_eval->add_option("--time-limit", eval.time_limit, "Override the time limit");
    c_eval->add_option("--time-limits", eval.time_limits, "Comma-separated time limits")->delimiter(',');

    RobustArgs robust;
    auto* c_robust = app.add_subcommand("robust", "Robustness sweep over perturbed scenarios");
    c_robust->add_option("--scenario", robust.scenario, "Base scenario")->required();
    add_policy_options(c_robust, robust.policy);
    c_robust->add_option("--kinds", robust.kinds, "all or a comma list of variation kinds")->delimiter(',');
    c_robust->add_option("--variants", robust.variants, "Perturbed scenarios per kind")->capture_default_str();
    c_robust->add_option("--seed", robust.seed, "First perturbation seed")->capture_default_str();

    TraceArgs trace;
    auto* c_trace = app.add_subcommand("trace", "Export one rollout as a trajectory CSV");
    c_trace->add_option("--scenario", trace.scenario, "Scenario file")->required();
    add_policy_options(c_trace, trace.policy);
    c_trace->add_option("--seed", trace.seed, "Rollout seed")->capture_default_str();
    c_trace->add_option("--time-limit", trace.time_limit, "Override the time limit");
    c_trace->add_flag("--planes", trace.planes, "Also dump the initial global planes");

    PlotArgs plot_args;
    auto* c_plot = app.add_subcommand("plot", "Render SVG figures from CSV outputs");
    c_plot->add_option("--metrics", plot_args.metrics, "Training metrics CSV");
    c_plot->add_option("--eval", plot_args.eval, "Evaluation CSV");
    c_plot->add_option("--trajectory", plot_args.trajectory, "Trajectory CSV");
    c_plot->add_option("--scenario", plot_args.scenario, "Scenario for --trajectory");
    c_plot->add_option("--window", plot_args.window, "Moving-average window")->capture_default_str();

    // CLI11 wants argv order reversed when given a vector.
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (std::find(args.begin(), args.end(), "--replay") != args.end() ||
        std::any_of(args.begin(), args.end(), [](const std::string& s) { return s.rfind("--replay=", 0) == 0; })) {
        app.require_subcommand(0, 1);
    }
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    if (!replay.empty()) {
        const json doc = json::parse(read_file(replay));
        std::vector<std::string> recorded = doc.at("args").get<std::vector<std::string>>();
        const fs::path target = out_arg.empty() ? fs::absolute(fs::path(replay)).parent_path() / "replay"
                                                : fs::absolute(resolve_out(out_arg, "replay"));
        fs::current_path(doc.at("cwd").get<std::string>());
        recorded.push_back("--out");
        recorded.push_back(target.string());
        std::cerr << "replaying into " << target.string() << "\n";
        return dispatch(recorded);
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string verb = sub->get_name();
    const fs::path out = resolve_out(out_arg, verb);
    fs::create_directories(out);
    Manifest manifest(verb, args);
    int code = 0;
    if (verb == "gen") code = cmd_gen(gen, out, manifest);
    else if (verb == "train") code = cmd_train(train, out, manifest);
    else if (verb == "eval") code = cmd_eval(eval, out, manifest);
    else if (verb == "robust") code = cmd_robust(robust, out, manifest);
    else if (verb == "trace") code = cmd_trace(trace, out, manifest);
    else if (verb == "plot") code = cmd_plot(plot_args, out, manifest);
    if (code != kExitNumerical) manifest.write(out);
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return dispatch(args);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what() << "\n" << e.dump();
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
}
