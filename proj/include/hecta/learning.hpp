#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hecta/mixing.hpp"

namespace hecta {

// One decision step. State snapshots are kept instead of encoded planes; the
// planes are rebuilt when a batch is assembled.
struct EpisodeStep {
    std::vector<EntityState> entities;
    std::vector<TaskState> tasks;
    std::vector<std::vector<char>> masks;  // movable masks before acting
    std::vector<int> actions;              // executed target cells
    double reward = 0.0;
    double nonterminal = 1.0;  // te
    Mat q_snapshot;            // optional, (cells x F)
    Mat hidden_snapshot;       // optional, (hidden x F)
};

struct EpisodeRecord {
    std::shared_ptr<const ScenarioSpec> scenario;
    std::vector<EpisodeStep> steps;

    // Throws std::invalid_argument when the record is malformed.
    void validate() const;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(EpisodeRecord record);
    std::size_t size() const { return slots_.size(); }
    std::size_t capacity() const { return capacity_; }
    // Slot the next push writes to.
    std::size_t cursor() const { return cursor_; }
    const EpisodeRecord& at(std::size_t slot) const { return slots_.at(slot); }

    // Uniform without replacement; throws std::invalid_argument when underfull.
    std::vector<const EpisodeRecord*> sample(std::size_t batch_size, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t cursor_ = 0;
    std::vector<EpisodeRecord> slots_;
};

TrainingBatch make_batch(const Model& model, const std::vector<const EpisodeRecord*>& episodes);

struct TrainConfig {
    int episodes = 3000;
    int time_limit = 0;  // 0 keeps the scenario's own limit
    double gamma = 0.7;
    double lr0 = 1e-4;
    double lr_decay_rate = 0.9;
    int lr_decay_interval = 1000;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double epsilon_decay_fraction = 0.5;  // share of episodes over which epsilon anneals
    int batch_size = 32;
    int buffer_capacity = 5000;
    int target_sync = 200;
    double lambda_opt = 1.0;
    double lambda_nopt = 1.0;
    double clip = 0.2;
    double rms_alpha = 0.99;
    double rms_eps = 1e-5;
    std::uint64_t seed = 1;
    int train_steps_per_episode = 1;
    bool hard_cooperative = true;  // false: voluntary variant
    bool ablate_eiem = false;
    bool ablate_sedm = false;
    bool v_grad_to_hidden = false;
    bool record_snapshots = false;
    int checkpoint_every = 0;  // 0: only the final checkpoint

    void validate() const;
};

double lr_at(int episode, const TrainConfig& config);
double epsilon_at(int episode, const TrainConfig& config);

struct MetricsRow {
    int episode = 0;
    bool trained = false;
    double loss = 0.0;
    double l_td = 0.0;
    double l_opt = 0.0;
    double l_nopt = 0.0;
    double episode_return = 0.0;
    double tcr = 0.0;
    double epsilon = 0.0;
    double lr = 0.0;
};

inline constexpr const char* kMetricsHeader = "episode,loss,l_td,l_opt,l_nopt,return,tcr,epsilon,lr";
// Untrained rows carry "nan" losses.
std::string format_metrics_row(const MetricsRow& row);

class NumericalAbort : public std::runtime_error {
public:
    NumericalAbort(const std::string& what, std::string dump) : std::runtime_error(what), dump_(std::move(dump)) {}
    const std::string& dump() const { return dump_; }

private:
    std::string dump_;
};

struct TrainState {
    ModelConfig model;
    Params params;
    Params target;
    Params optimizer;  // RMSprop square averages
};

Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& config, int episode);
TrainState train_state_from(const Checkpoint& ckp);

struct TrainHooks {
    std::function<void(const MetricsRow&)> on_metrics;
    std::function<void(int episode, const TrainState&)> on_checkpoint;
};

struct TrainResult {
    TrainState state;
    std::vector<MetricsRow> metrics;
    std::size_t buffer_size = 0;
    int train_steps = 0;
    int skipped_steps = 0;  // optimizer steps dropped for non-finite gradients
};

using ScenarioSource = std::function<ScenarioSpec(int episode)>;

TrainResult run_training(const ScenarioSource& source, const TrainConfig& config, const TrainHooks& hooks = {});
TrainResult run_training(const ScenarioSpec& scenario, const TrainConfig& config, const TrainHooks& hooks = {});

struct RolloutResult {
    double episode_return = 0.0;
    double tcr = 0.0;
    int steps = 0;
    int invalid_actions = 0;
    int completed = 0;
};

// Plays one episode. Fills `record` when given (LearnedPolicy snapshots are taken
// if `snapshots` is set) and writes trajectory rows when `trajectory` is given.
RolloutResult rollout(const ScenarioSpec& scenario, Policy& policy, Rng& rng, bool hard_cooperative,
                      EpisodeRecord* record = nullptr, TrajectoryWriter* trajectory = nullptr, bool snapshots = false);

struct TcrStats {
    std::vector<double> values;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
    double ci95 = 0.0;    // half-width, Student t
};

TcrStats tcr_stats(std::vector<double> values);

enum class EvalMode { GreedyExec, Stochastic };

// Rollout i uses rng seed `seed + i`.
TcrStats evaluate_policy(Policy& policy, const ScenarioSpec& scenario, int n_seeds, std::uint64_t seed,
                         bool hard_cooperative = true);
// Learned agents; GreedyExec runs at epsilon 0, Stochastic at `stochastic_epsilon`.
TcrStats evaluate_policy(const Model& model, const Params& params, const ScenarioSpec& scenario, int n_seeds,
                         EvalMode mode, std::uint64_t seed, bool hard_cooperative = true,
                         double stochastic_epsilon = 0.05);

struct RobustnessRow {
    VariationKind kind;
    TcrStats stats;  // one value per perturbed scenario
};

// Variant i of each kind is perturb_scenario(base, kind, seed + i).
std::vector<RobustnessRow> robustness_sweep(Policy& policy, const ScenarioSpec& base,
                                            const std::vector<VariationKind>& kinds, int n_variants,
                                            std::uint64_t seed, bool hard_cooperative = true);

}  // namespace hecta
