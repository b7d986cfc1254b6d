#include "hecta/learning.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "hecta/nn/optim.hpp"

namespace hecta {

void EpisodeRecord::validate() const {
    if (!scenario) throw std::invalid_argument("episode record has no scenario");
    if (steps.empty()) throw std::invalid_argument("episode record has no steps");
    if (static_cast<int>(steps.size()) > scenario->time_limit)
        throw std::invalid_argument("episode record is longer than the time limit");
    const std::size_t F = scenario->entities.size();
    const std::size_t cells = scenario->cell_count();
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const EpisodeStep& s = steps[t];
        if (s.entities.size() != F || s.masks.size() != F || s.actions.size() != F)
            throw std::invalid_argument("episode step " + std::to_string(t) + " does not cover every entity");
        if (s.tasks.size() != scenario->tasks.size())
            throw std::invalid_argument("episode step " + std::to_string(t) + " does not cover every task");
        for (std::size_t k = 0; k < F; ++k) {
            if (s.masks[k].size() != cells) throw std::invalid_argument("mask size differs from the grid");
            if (s.actions[k] < 0 || s.actions[k] >= static_cast<int>(cells))
                throw std::invalid_argument("action outside the grid");
        }
        const bool last = t + 1 == steps.size();
        if (s.nonterminal != (last ? 0.0 : 1.0))
            throw std::invalid_argument("terminal flag must be 0 exactly on the final step");
        if (!std::isfinite(s.reward)) throw std::invalid_argument("non-finite reward");
    }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void ReplayBuffer::push(EpisodeRecord record) {
    record.validate();
    if (slots_.size() < capacity_)
        slots_.push_back(std::move(record));
    else
        slots_[cursor_] = std::move(record);
    cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<const EpisodeRecord*> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
    if (batch_size == 0 || batch_size > slots_.size())
        throw std::invalid_argument("replay buffer holds fewer episodes than the batch size");
    std::vector<std::size_t> idx(slots_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<const EpisodeRecord*> out;
    for (std::size_t i = 0; i < batch_size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
        out.push_back(&slots_[idx[i]]);
    }
    return out;
}

TrainingBatch make_batch(const Model& model, const std::vector<const EpisodeRecord*>& episodes) {
    if (episodes.empty()) throw std::invalid_argument("empty training batch");
    const auto& cfg = model.config();
    const int F = cfg.agent_count();
    const int P = cfg.cells();
    int T = 0;
    for (const auto* e : episodes) {
        const ScenarioSpec& spec = *e->scenario;
        if (spec.grid_height != cfg.grid_height || spec.grid_width != cfg.grid_width ||
            static_cast<int>(spec.entities.size()) != F)
            throw std::invalid_argument("episode layout does not match the model");
        for (int k = 0; k < F; ++k)
            if (spec.entities[k].entity_class != cfg.agent_classes[k])
                throw std::invalid_argument("episode entity classes do not match the model");
        T = std::max(T, static_cast<int>(e->steps.size()));
    }
    const Index B = static_cast<Index>(episodes.size()), n = T * B;

    TrainingBatch batch;
    batch.steps = T;
    batch.batch = static_cast<int>(B);
    batch.global = Mat::Zero(kGlobalChannels * P, n);
    batch.agents.steps = T;
    batch.agents.batch = static_cast<int>(B);
    batch.agents.local = Mat::Zero(kLocalChannels * P, n * F);
    batch.agents.extras = Mat::Zero(F + 2, n * F);
    batch.actions.assign(n * F, 0);
    batch.masks = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(P, n * F, false);
    batch.reward = Eigen::VectorXd::Zero(n);
    batch.nonterminal = Eigen::VectorXd::Zero(n);
    batch.valid = Eigen::VectorXd::Zero(n);

    for (Index b = 0; b < B; ++b) {
        const EpisodeRecord& rec = *episodes[b];
        const ScenarioSpec& spec = *rec.scenario;
        for (Index t = 0; t < static_cast<Index>(rec.steps.size()); ++t) {
            const EpisodeStep& s = rec.steps[t];
            const Index i = t * B + b;
            batch.global.col(i) = encode_global(spec, s.entities, s.tasks).planes;
            for (int k = 0; k < F; ++k) {
                const Index col = i * F + k;
                fill_agent_inputs(encode_local(spec, k, s.entities[k], s.masks[k]), batch.agents.local,
                                  batch.agents.extras, col);
                batch.actions[col] = s.actions[k];
                for (int c = 0; c < P; ++c) batch.masks(c, col) = s.masks[k][c] != 0;
            }
            batch.reward(i) = s.reward;
            batch.nonterminal(i) = s.nonterminal;
            batch.valid(i) = 1.0;
        }
    }
    return batch;
}

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(what);
    };
    require(episodes >= 0, "episodes must be non-negative");
    require(time_limit >= 0, "time_limit must be non-negative");
    require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
    require(lr0 > 0.0, "lr0 must be positive");
    require(lr_decay_rate > 0.0 && lr_decay_rate <= 1.0, "lr decay rate must lie in (0, 1]");
    require(lr_decay_interval > 0, "lr decay interval must be positive");
    require(epsilon_start >= 0.0 && epsilon_start <= 1.0, "epsilon_start must lie in [0, 1]");
    require(epsilon_end >= 0.0 && epsilon_end <= 1.0, "epsilon_end must lie in [0, 1]");
    require(epsilon_decay_fraction >= 0.0 && epsilon_decay_fraction <= 1.0, "epsilon decay fraction must lie in [0, 1]");
    require(batch_size > 0, "batch_size must be positive");
    require(buffer_capacity > 0, "buffer capacity must be positive");
    require(batch_size <= buffer_capacity, "batch_size must not exceed the buffer capacity");
    require(target_sync > 0, "target sync interval must be positive");
    require(lambda_opt >= 0.0 && lambda_nopt >= 0.0, "loss weights must be non-negative");
    require(clip > 0.0, "clip must be positive");
    require(train_steps_per_episode > 0, "train steps per episode must be positive");
    require(checkpoint_every >= 0, "checkpoint interval must be non-negative");
}

double lr_at(int episode, const TrainConfig& config) {
    if (episode < 1) throw std::invalid_argument("episodes are numbered from 1");
    return config.lr0 * std::pow(config.lr_decay_rate, (episode - 1) / config.lr_decay_interval);
}

double epsilon_at(int episode, const TrainConfig& config) {
    const double span = config.epsilon_decay_fraction * config.episodes;
    if (span <= 0.0) return config.epsilon_end;
    const double frac = (episode - 1) / span;
    if (frac >= 1.0) return config.epsilon_end;
    return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
}

std::string format_metrics_row(const MetricsRow& r) {
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return std::string(buf);
    };
    auto loss = [&](double v) { return r.trained ? num(v) : std::string("nan"); };
    std::ostringstream out;
    out << r.episode << ',' << loss(r.loss) << ',' << loss(r.l_td) << ',' << loss(r.l_opt) << ',' << loss(r.l_nopt)
        << ',' << num(r.episode_return) << ',' << num(r.tcr) << ',' << num(r.epsilon) << ',' << num(r.lr);
    return out.str();
}

Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& config, int episode) {
    Checkpoint ckp;
    ckp.metadata = state.model.to_metadata();
    ckp.metadata["episode"] = std::to_string(episode);
    ckp.metadata["train.seed"] = std::to_string(config.seed);
    ckp.metadata["train.hard_cooperative"] = config.hard_cooperative ? "1" : "0";
    merge_prefixed(ckp.params, state.params, "eval");
    merge_prefixed(ckp.params, state.target, "target");
    merge_prefixed(ckp.params, state.optimizer, "rmsprop");
    return ckp;
}

TrainState train_state_from(const Checkpoint& ckp) {
    TrainState s;
    s.model = ModelConfig::from_metadata(ckp.metadata);
    s.params = extract_prefixed(ckp.params, "eval");
    s.target = extract_prefixed(ckp.params, "target");
    s.optimizer = extract_prefixed(ckp.params, "rmsprop");
    const Params expected = Model(s.model).declare();
    if (!s.params.same_layout(expected)) throw CheckpointError("checkpoint parameters do not match the model");
    return s;
}

RolloutResult rollout(const ScenarioSpec& scenario, Policy& policy, Rng& rng, bool hard_cooperative,
                      EpisodeRecord* record, TrajectoryWriter* trajectory, bool snapshots) {
    World world(scenario, hard_cooperative);
    policy.reset(world);
    auto* learned = dynamic_cast<LearnedPolicy*>(&policy);
    if (record) {
        record->scenario = std::make_shared<const ScenarioSpec>(scenario);
        record->steps.clear();
    }
    if (trajectory) trajectory->write_initial(world);

    RolloutResult result;
    while (!world.done()) {
        EpisodeStep step;
        if (record) {
            step.entities = world.entities();
            step.tasks = world.tasks();
            for (int k = 0; k < world.entity_count(); ++k) step.masks.push_back(world.movable_mask(k));
        }
        const JointAction action = policy.act(world, rng);
        const StepOutcome out = world.step(action);
        result.episode_return += out.reward;
        result.invalid_actions += out.invalid_action ? 1 : 0;
        ++result.steps;
        if (record) {
            for (int k = 0; k < world.entity_count(); ++k) step.actions.push_back(scenario.index_of(world.entity(k).position));
            step.reward = out.reward;
            step.nonterminal = out.done ? 0.0 : 1.0;
            if (snapshots && learned) {
                step.q_snapshot = learned->last_q();
                step.hidden_snapshot = learned->hidden();
            }
            record->steps.push_back(std::move(step));
        }
        if (trajectory) trajectory->write_step(world, out);
    }
    result.tcr = world.tcr();
    result.completed = world.completed_count();
    return result;
}

namespace {

ScenarioSpec with_time_limit(ScenarioSpec spec, int time_limit) {
    if (time_limit > 0) spec.time_limit = time_limit;
    return spec;
}

std::string describe_abort(int episode, const LossResult& loss, const std::vector<const EpisodeRecord*>& batch,
                           const Params& params) {
    std::ostringstream out;
    out << "episode " << episode << "\n";
    out << "loss " << loss.loss << " l_td " << loss.l_td << " l_opt " << loss.l_opt << " l_nopt " << loss.l_nopt
        << "\n";
    for (std::size_t i = 0; i < batch.size(); ++i) {
        double ret = 0.0;
        for (const auto& s : batch[i]->steps) ret += s.reward;
        out << "batch[" << i << "] steps " << batch[i]->steps.size() << " return " << ret << "\n";
    }
    for (const auto& [name, t] : params)
        if (!t.data.allFinite()) out << "non-finite parameter " << name << "\n";
    return out.str();
}

}  // namespace

TrainResult run_training(const ScenarioSource& source, const TrainConfig& config, const TrainHooks& hooks) {
    config.validate();
    const ScenarioSpec first = with_time_limit(source(1), config.time_limit);
    ModelConfig mc = ModelConfig::for_scenario(first);
    mc.ablate_eiem = config.ablate_eiem;
    mc.ablate_sedm = config.ablate_sedm;
    const Model model(mc);

    Rng rng(config.seed);
    TrainResult result;
    TrainState& st = result.state;
    st.model = mc;
    st.params = model.init_params(rng());
    st.target = st.params;

    nn::RmsProp<double> optimizer(config.rms_alpha, config.rms_eps);
    ReplayBuffer buffer(config.buffer_capacity);
    const LossConfig loss_config{config.gamma, config.lambda_opt, config.lambda_nopt, config.v_grad_to_hidden};
    LearnedPolicy policy(model, st.params, config.epsilon_start);

    int episode = 1;
    try {
        for (; episode <= config.episodes; ++episode) {
            const ScenarioSpec spec = episode == 1 ? first : with_time_limit(source(episode), config.time_limit);
            if (ModelConfig::for_scenario(spec).agent_classes != mc.agent_classes || spec.grid_height != mc.grid_height ||
                spec.grid_width != mc.grid_width)
                throw std::invalid_argument("scenario source changed the grid or entity layout");

            MetricsRow row;
            row.episode = episode;
            row.epsilon = epsilon_at(episode, config);
            row.lr = lr_at(episode, config);
            policy.set_epsilon(row.epsilon);

            EpisodeRecord record;
            const RolloutResult rr = rollout(spec, policy, rng, config.hard_cooperative, &record, nullptr,
                                             config.record_snapshots);
            row.episode_return = rr.episode_return;
            row.tcr = rr.tcr;
            buffer.push(std::move(record));

            if (buffer.size() >= static_cast<std::size_t>(config.batch_size)) {
                for (int s = 0; s < config.train_steps_per_episode; ++s) {
                    const auto sample = buffer.sample(config.batch_size, rng);
                    const TrainingBatch batch = make_batch(model, sample);
                    LossResult loss = compute_loss(model, batch, st.params, st.target, loss_config);
                    if (!std::isfinite(loss.loss))
                        throw NumericalAbort("non-finite loss at episode " + std::to_string(episode),
                                             describe_abort(episode, loss, sample, st.params));
                    nn::clip_global_norm(loss.grads, config.clip);
                    if (optimizer.step(st.params, loss.grads, row.lr))
                        ++result.train_steps;
                    else
                        ++result.skipped_steps;
                    row.trained = true;
                    row.loss = loss.loss;
                    row.l_td = loss.l_td;
                    row.l_opt = loss.l_opt;
                    row.l_nopt = loss.l_nopt;
                }
            }
            if (episode % config.target_sync == 0) sync_targets(st.params, st.target);

            result.metrics.push_back(row);
            if (hooks.on_metrics) hooks.on_metrics(row);
            if (config.checkpoint_every > 0 && episode % config.checkpoint_every == 0 && hooks.on_checkpoint) {
                st.optimizer = optimizer.square_avg();
                hooks.on_checkpoint(episode, st);
            }
        }
    } catch (const std::domain_error& e) {
        // Overflow inside a forward pass or the optimizer update.
        std::ostringstream dump;
        dump << "episode " << episode << "\n" << e.what() << "\n";
        for (const auto& [name, t] : st.params)
            if (!t.data.allFinite()) dump << "non-finite parameter " << name << "\n";
        throw NumericalAbort(std::string(e.what()) + " at episode " + std::to_string(episode), dump.str());
    }
    st.optimizer = optimizer.square_avg();
    result.buffer_size = buffer.size();
    return result;
}

TrainResult run_training(const ScenarioSpec& scenario, const TrainConfig& config, const TrainHooks& hooks) {
    return run_training([&](int) { return scenario; }, config, hooks);
}

TcrStats tcr_stats(std::vector<double> values) {
    static constexpr double kT975[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                       2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                                       2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
    TcrStats s;
    s.values = std::move(values);
    const std::size_t n = s.values.size();
    if (n == 0) return s;
    s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
    if (n < 2) return s;
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (n - 1));
    const std::size_t df = n - 1;
    const double t = df <= 30 ? kT975[df - 1] : 1.96;
    s.ci95 = t * s.stddev / std::sqrt(static_cast<double>(n));
    return s;
}

TcrStats evaluate_policy(Policy& policy, const ScenarioSpec& scenario, int n_seeds, std::uint64_t seed,
                         bool hard_cooperative) {
    std::vector<double> values;
    for (int i = 0; i < n_seeds; ++i) {
        Rng rng(seed + i);
        values.push_back(rollout(scenario, policy, rng, hard_cooperative).tcr);
    }
    return tcr_stats(std::move(values));
}

TcrStats evaluate_policy(const Model& model, const Params& params, const ScenarioSpec& scenario, int n_seeds,
                         EvalMode mode, std::uint64_t seed, bool hard_cooperative, double stochastic_epsilon) {
    LearnedPolicy policy(model, params, mode == EvalMode::GreedyExec ? 0.0 : stochastic_epsilon);
    return evaluate_policy(policy, scenario, n_seeds, seed, hard_cooperative);
}

std::vector<RobustnessRow> robustness_sweep(Policy& policy, const ScenarioSpec& base,
                                            const std::vector<VariationKind>& kinds, int n_variants,
                                            std::uint64_t seed, bool hard_cooperative) {
    std::vector<RobustnessRow> rows;
    if (n_variants <= 0) return rows;
    for (VariationKind kind : kinds) {
        std::vector<double> values;
        for (int i = 0; i < n_variants; ++i) {
            const ScenarioSpec variant = perturb_scenario(base, kind, seed + i);
            Rng rng(seed + i);
            values.push_back(rollout(variant, policy, rng, hard_cooperative).tcr);
        }
        rows.push_back({kind, tcr_stats(std::move(values))});
    }
    return rows;
}

}  // namespace hecta
