#include "hecta/policy.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hecta {

namespace {

constexpr EntityClass kClassOrder[] = {EntityClass::Worker, EntityClass::Uav, EntityClass::Ugv};

std::string flag(bool b) { return b ? "1" : "0"; }

const std::string& meta_at(const std::map<std::string, std::string>& meta, const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw CheckpointError("checkpoint metadata lacks '" + key + "'");
    return it->second;
}

}  // namespace

ModelConfig ModelConfig::for_scenario(const ScenarioSpec& spec) {
    ModelConfig c;
    c.grid_height = spec.grid_height;
    c.grid_width = spec.grid_width;
    for (const auto& e : spec.entities) c.agent_classes.push_back(e.entity_class);
    return c;
}

std::map<std::string, std::string> ModelConfig::to_metadata() const {
    std::ostringstream classes;
    for (std::size_t i = 0; i < agent_classes.size(); ++i) classes << (i ? "," : "") << to_string(agent_classes[i]);
    return {{"model.grid_height", std::to_string(grid_height)},
            {"model.grid_width", std::to_string(grid_width)},
            {"model.agent_classes", classes.str()},
            {"model.hidden", std::to_string(hidden)},
            {"model.conv_channels", std::to_string(conv_channels)},
            {"model.mixer_hidden", std::to_string(mixer_hidden)},
            {"model.ablate_eiem", flag(ablate_eiem)},
            {"model.ablate_sedm", flag(ablate_sedm)}};
}

ModelConfig ModelConfig::from_metadata(const std::map<std::string, std::string>& meta) {
    ModelConfig c;
    c.grid_height = std::stoi(meta_at(meta, "model.grid_height"));
    c.grid_width = std::stoi(meta_at(meta, "model.grid_width"));
    std::stringstream classes(meta_at(meta, "model.agent_classes"));
    for (std::string item; std::getline(classes, item, ',');) c.agent_classes.push_back(parse_entity_class(item));
    c.hidden = std::stoi(meta_at(meta, "model.hidden"));
    c.conv_channels = std::stoi(meta_at(meta, "model.conv_channels"));
    c.mixer_hidden = std::stoi(meta_at(meta, "model.mixer_hidden"));
    c.ablate_eiem = meta_at(meta, "model.ablate_eiem") == "1";
    c.ablate_sedm = meta_at(meta, "model.ablate_sedm") == "1";
    return c;
}

std::string param_prefix(EntityClass c) { return "agent." + std::string(to_string(c)); }

Model::Model(ModelConfig config) : config_(std::move(config)) {
    if (config_.agent_count() == 0) throw std::invalid_argument("model needs at least one agent");
    if (!config_.ablate_eiem && (config_.grid_height < 4 || config_.grid_width < 4))
        throw std::invalid_argument("conv feature extractor needs a grid of at least 4x4");
    for (EntityClass c : kClassOrder)
        if (std::find(config_.agent_classes.begin(), config_.agent_classes.end(), c) != config_.agent_classes.end())
            classes_.push_back(c);
    global_conv_ = {"eiem.global.conv", kGlobalChannels, config_.conv_channels, 3, config_.grid_height,
                    config_.grid_width};
    local_conv_ = {"eiem.local.conv", kLocalChannels, config_.conv_channels, 3, config_.grid_height,
                   config_.grid_width};
}

nn::MaxPool2<double> Model::pool_for(const nn::Conv2d<double>& conv) const {
    return {conv.out_channels, conv.out_height(), conv.out_width()};
}

int Model::global_feature_size() const {
    if (config_.ablate_eiem) return static_cast<int>(global_conv_.input_size());
    return static_cast<int>(pool_for(global_conv_).output_size());
}

int Model::local_feature_size() const {
    if (config_.ablate_eiem) return static_cast<int>(local_conv_.input_size());
    return static_cast<int>(pool_for(local_conv_).output_size());
}

nn::Dense<double> Model::fc_in(EntityClass c) const {
    return {param_prefix(c) + ".fc_in", agent_input_size(), config_.hidden};
}
nn::Gru<double> Model::gru(EntityClass c) const { return {param_prefix(c) + ".gru", config_.hidden, config_.hidden}; }
nn::Dense<double> Model::feed_forward(EntityClass c) const {
    return {param_prefix(c) + ".ff", config_.hidden, config_.hidden};
}
nn::Dense<double> Model::fc_out(EntityClass c) const {
    return {param_prefix(c) + ".fc_out", config_.hidden, action_count()};
}
nn::Dense<double> Model::mixer_q_hidden() const {
    const int in = global_feature_size() + config_.agent_count() * (config_.hidden + action_count());
    return {"mixer.q.fc1", in, config_.mixer_hidden};
}
nn::Dense<double> Model::mixer_q_out() const { return {"mixer.q.fc2", config_.mixer_hidden, 1}; }
nn::Dense<double> Model::mixer_v_hidden() const {
    const int in = global_feature_size() + config_.agent_count() * config_.hidden;
    return {"mixer.v.fc1", in, config_.mixer_hidden};
}
nn::Dense<double> Model::mixer_v_out() const { return {"mixer.v.fc2", config_.mixer_hidden, 1}; }

Params Model::declare() const {
    Params p;
    if (!config_.ablate_eiem) {
        global_conv_.declare(p);
        local_conv_.declare(p);
    }
    for (EntityClass c : classes_) {
        fc_in(c).declare(p);
        if (config_.ablate_sedm)
            feed_forward(c).declare(p);
        else
            gru(c).declare(p);
        fc_out(c).declare(p);
    }
    mixer_q_hidden().declare(p);
    mixer_q_out().declare(p);
    mixer_v_hidden().declare(p);
    mixer_v_out().declare(p);
    return p;
}

Params Model::init_params(std::uint64_t seed) const {
    Params p = declare();
    Rng rng(seed);
    if (!config_.ablate_eiem) {
        global_conv_.init(p, rng);
        local_conv_.init(p, rng);
    }
    for (EntityClass c : classes_) {
        fc_in(c).init(p, rng);
        if (config_.ablate_sedm)
            feed_forward(c).init(p, rng);
        else
            gru(c).init(p, rng);
        fc_out(c).init(p, rng);
    }
    mixer_q_hidden().init(p, rng);
    mixer_q_out().init(p, rng);
    mixer_v_hidden().init(p, rng);
    mixer_v_out().init(p, rng);
    return p;
}

Mat Model::features(const nn::Conv2d<double>& conv, const Params& p, const Mat& planes, FeatureCache* cache) const {
    if (planes.rows() != conv.input_size()) throw std::invalid_argument("feature input planes do not match the grid");
    if (config_.ablate_eiem) return planes;
    Mat pre = conv.forward(p, planes, cache ? &cache->conv : nullptr);
    Mat out = pool_for(conv).forward(nn::relu(pre), cache ? &cache->pool : nullptr);
    if (cache) cache->pre = std::move(pre);
    return out;
}

void Model::features_backward(const nn::Conv2d<double>& conv, const Params& p, Params& g, const FeatureCache& cache,
                              const Mat& d) const {
    if (config_.ablate_eiem) return;
    const Mat dact = pool_for(conv).backward(cache.pool, d);
    conv.backward(p, g, cache.conv, nn::relu_backward(cache.pre, dact), false);
}

Mat Model::global_features(const Params& p, const Mat& planes, FeatureCache* cache) const {
    return features(global_conv_, p, planes, cache);
}
void Model::global_features_backward(const Params& p, Params& g, const FeatureCache& cache, const Mat& d) const {
    features_backward(global_conv_, p, g, cache, d);
}
Mat Model::local_features(const Params& p, const Mat& planes, FeatureCache* cache) const {
    return features(local_conv_, p, planes, cache);
}
void Model::local_features_backward(const Params& p, Params& g, const FeatureCache& cache, const Mat& d) const {
    features_backward(local_conv_, p, g, cache, d);
}

Model::AgentPass Model::agents_forward(const Params& p, const AgentBatch& in, bool keep_cache,
                                       const Mat* initial_hidden) const {
    const int F = config_.agent_count();
    const Index T = in.steps, B = in.batch, n_all = T * B * F;
    if (in.local.cols() != n_all || in.extras.cols() != n_all || in.extras.rows() != F + 2)
        throw std::invalid_argument("agent batch has inconsistent shape");
    if (initial_hidden && (initial_hidden->rows() != config_.hidden || initial_hidden->cols() != B * F))
        throw std::invalid_argument("initial hidden state has wrong shape");

    AgentPass pass;
    pass.steps = in.steps;
    pass.batch = in.batch;
    pass.cached = keep_cache;
    const Index lf = local_feature_size();
    Mat x(agent_input_size(), n_all);
    x.topRows(lf) = local_features(p, in.local, keep_cache ? &pass.features : nullptr);
    x.bottomRows(F + 2) = in.extras;
    pass.q.resize(action_count(), n_all);
    pass.hidden.resize(config_.hidden, n_all);

    for (EntityClass c : classes_) {
        ClassPass cp;
        cp.entity_class = c;
        for (int k = 0; k < F; ++k)
            if (config_.agent_classes[k] == c) cp.agents.push_back(k);
        const Index K = static_cast<Index>(cp.agents.size()), width = B * K, n = T * width;
        cp.x.resize(x.rows(), n);
        for (Index tb = 0; tb < T * B; ++tb)
            for (Index j = 0; j < K; ++j) cp.x.col(tb * K + j) = x.col(tb * F + cp.agents[j]);

        cp.in_pre = fc_in(c).forward(p, cp.x);
        cp.in_act = nn::relu(cp.in_pre);
        if (config_.ablate_sedm) {
            cp.ff_pre = feed_forward(c).forward(p, cp.in_act);
            cp.hidden = nn::relu(cp.ff_pre);
        } else {
            const auto cell = gru(c);
            Mat h = Mat::Zero(config_.hidden, width);
            if (initial_hidden)
                for (Index b = 0; b < B; ++b)
                    for (Index j = 0; j < K; ++j) h.col(b * K + j) = initial_hidden->col(b * F + cp.agents[j]);
            cp.hidden.resize(config_.hidden, n);
            if (keep_cache) cp.gru.resize(T);
            for (Index t = 0; t < T; ++t) {
                h = cell.forward(p, cp.in_act.middleCols(t * width, width), h, keep_cache ? &cp.gru[t] : nullptr);
                cp.hidden.middleCols(t * width, width) = h;
            }
        }
        const Mat q = fc_out(c).forward(p, cp.hidden);
        for (Index tb = 0; tb < T * B; ++tb) {
            for (Index j = 0; j < K; ++j) {
                pass.q.col(tb * F + cp.agents[j]) = q.col(tb * K + j);
                pass.hidden.col(tb * F + cp.agents[j]) = cp.hidden.col(tb * K + j);
            }
        }
        if (keep_cache) pass.classes.push_back(std::move(cp));
    }
    return pass;
}

void Model::agents_backward(const Params& p, Params& g, const AgentPass& pass, const Mat& dq,
                            const Mat& dhidden) const {
    if (!pass.cached) throw std::logic_error("agents_backward needs a cached forward pass");
    const int F = config_.agent_count();
    const Index T = pass.steps, B = pass.batch, n_all = T * B * F;
    const Index lf = local_feature_size();
    Mat dlocal = Mat::Zero(lf, n_all);

    for (const ClassPass& cp : pass.classes) {
        const EntityClass c = cp.entity_class;
        const Index K = static_cast<Index>(cp.agents.size()), width = B * K, n = T * width;
        Mat dq_c(dq.rows(), n);
        Mat dh_c(config_.hidden, n);
        for (Index tb = 0; tb < T * B; ++tb) {
            for (Index j = 0; j < K; ++j) {
                dq_c.col(tb * K + j) = dq.col(tb * F + cp.agents[j]);
                if (dhidden.size())
                    dh_c.col(tb * K + j) = dhidden.col(tb * F + cp.agents[j]);
                else
                    dh_c.col(tb * K + j).setZero();
            }
        }
        dh_c += fc_out(c).backward(p, g, cp.hidden, dq_c);

        Mat din_act;
        if (config_.ablate_sedm) {
            din_act = feed_forward(c).backward(p, g, cp.in_act, nn::relu_backward(cp.ff_pre, dh_c));
        } else {
            const auto cell = gru(c);
            din_act.resize(config_.hidden, n);
            Mat carry = Mat::Zero(config_.hidden, width);
            for (Index t = T - 1; t >= 0; --t) {
                const Mat dout = dh_c.middleCols(t * width, width) + carry;
                auto grads = cell.backward(p, g, cp.gru[t], dout);
                din_act.middleCols(t * width, width) = grads.dx;
                carry = std::move(grads.dh);
            }
        }
        const Mat dx = fc_in(c).backward(p, g, cp.x, nn::relu_backward(cp.in_pre, din_act));
        for (Index tb = 0; tb < T * B; ++tb)
            for (Index j = 0; j < K; ++j) dlocal.col(tb * F + cp.agents[j]) += dx.col(tb * K + j).head(lf);
    }
    local_features_backward(p, g, pass.features, dlocal);
}

void fill_agent_inputs(const LocalObsTensor& obs, Mat& local, Mat& extras, Index col) {
    local.col(col) = obs.planes;
    const Index F = obs.id_onehot.size();
    extras.col(col).head(F) = obs.id_onehot;
    extras(F, col) = obs.urge[0];
    extras(F + 1, col) = obs.urge[1];
}

int select_action_filtered(const Eigen::VectorXd& q, const std::vector<char>& mask, double epsilon, Rng& rng) {
    if (static_cast<Index>(mask.size()) != q.size()) throw std::invalid_argument("mask and q differ in length");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
    std::vector<int> allowed;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) allowed.push_back(static_cast<int>(i));
    if (allowed.empty()) throw std::invalid_argument("empty action mask");

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
        std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
        return allowed[pick(rng)];
    }
    int best = allowed.front();
    for (int i : allowed)
        if (q(i) > q(best)) best = i;
    return best;
}

Cell greedy_policy(const World& world, int entity_id) {
    const ScenarioSpec& spec = world.scenario();
    const EntityState& self = world.entity(entity_id);
    const EntityClass cls = spec.entities[entity_id].entity_class;

    std::vector<Cell> targets;
    for (int i = 0; i < world.task_count(); ++i)
        if (world.tasks()[i].remaining > 0 && serving_class(spec.tasks[i].type) == cls)
            targets.push_back(spec.tasks[i].location);
    if (targets.empty()) return self.position;
    if (std::find(targets.begin(), targets.end(), self.position) != targets.end()) return self.position;

    Cell best = self.position;
    double best_distance = std::numeric_limits<double>::infinity();
    for (Cell c : world.movable_range(entity_id)) {  // row-major order
        double d = std::numeric_limits<double>::infinity();
        for (Cell t : targets) d = std::min(d, distance(c, t));
        if (d < best_distance) {
            best_distance = d;
            best = c;
        }
    }
    return best;
}

JointAction voluntary_override_policy(const World& /*world*/, const JointAction& proposed) { return proposed; }

JointAction GreedyPolicy::act(const World& world, Rng& /*rng*/) {
    JointAction a(world.entity_count());
    for (int id = 0; id < world.entity_count(); ++id) a[id] = greedy_policy(world, id);
    return a;
}

JointAction RandomPolicy::act(const World& world, Rng& rng) {
    JointAction a(world.entity_count());
    for (int id = 0; id < world.entity_count(); ++id) {
        const auto range = world.movable_range(id);
        std::uniform_int_distribution<std::size_t> pick(0, range.size() - 1);
        a[id] = range[pick(rng)];
    }
    return a;
}

LearnedPolicy::LearnedPolicy(const Model& model, const Params& params, double epsilon)
    : model_(model), params_(params), epsilon_(epsilon) {
    hidden_ = Mat::Zero(model_.config().hidden, model_.config().agent_count());
}

void LearnedPolicy::reset(const World& world) {
    if (world.entity_count() != model_.config().agent_count() ||
        world.scenario().grid_height != model_.config().grid_height ||
        world.scenario().grid_width != model_.config().grid_width)
        throw std::invalid_argument("scenario layout does not match the model");
    hidden_.setZero();
}

JointAction LearnedPolicy::act(const World& world, Rng& rng) {
    const int F = model_.config().agent_count();
    Model::AgentBatch in;
    in.steps = 1;
    in.batch = 1;
    in.local.resize(kLocalChannels * model_.config().cells(), F);
    in.extras.resize(F + 2, F);
    std::vector<std::vector<char>> masks(F);
    for (int k = 0; k < F; ++k) {
        masks[k] = world.movable_mask(k);
        fill_agent_inputs(encode_local(world.scenario(), k, world.entity(k), masks[k]), in.local, in.extras, k);
    }
    const auto pass = model_.agents_forward(params_, in, false, &hidden_);
    if (!pass.q.allFinite()) throw std::domain_error("non-finite action values");
    hidden_ = pass.hidden;
    last_q_ = pass.q;

    JointAction action(F);
    for (int k = 0; k < F; ++k) {
        const int idx = select_action_filtered(pass.q.col(k), masks[k], epsilon_, rng);
        action[k] = world.scenario().cell_at(idx);
    }
    return voluntary_override_policy(world, action);
}

}  // namespace hecta
