#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hecta/checkpoint.hpp"
#include "hecta/encoding.hpp"
#include "hecta/nn/layers.hpp"
#include "hecta/world.hpp"

namespace hecta {

using Rng = std::mt19937_64;
using Mat = nn::Matrix<double>;
using nn::Index;

struct ModelConfig {
    int grid_height = 0;
    int grid_width = 0;
    std::vector<EntityClass> agent_classes;  // indexed by entity id
    int hidden = 128;
    int conv_channels = 10;
    int mixer_hidden = 128;
    bool ablate_eiem = false;  // conv blocks replaced by plain flattening
    bool ablate_sedm = false;  // recurrent cell replaced by a feed-forward layer

    int agent_count() const { return static_cast<int>(agent_classes.size()); }
    int cells() const { return grid_height * grid_width; }

    static ModelConfig for_scenario(const ScenarioSpec& spec);
    std::map<std::string, std::string> to_metadata() const;
    static ModelConfig from_metadata(const std::map<std::string, std::string>& meta);

    bool operator==(const ModelConfig&) const = default;
};

// Network layout: shared conv feature extractors, one recurrent Q-network per
// entity class, and the centralized Q_tot / V heads.
class Model {
public:
    explicit Model(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    int action_count() const { return config_.cells(); }
    int global_feature_size() const;
    int local_feature_size() const;
    // [local features | id one-hot | urge]
    int agent_input_size() const { return local_feature_size() + config_.agent_count() + 2; }
    const std::vector<EntityClass>& classes() const { return classes_; }

    Params declare() const;
    Params init_params(std::uint64_t seed) const;

    struct FeatureCache {
        nn::Conv2d<double>::Cache conv;
        Mat pre;
        nn::MaxPool2<double>::Cache pool;
    };
    Mat global_features(const Params& p, const Mat& planes, FeatureCache* cache = nullptr) const;
    void global_features_backward(const Params& p, Params& g, const FeatureCache& cache, const Mat& d) const;
    Mat local_features(const Params& p, const Mat& planes, FeatureCache* cache = nullptr) const;
    void local_features_backward(const Params& p, Params& g, const FeatureCache& cache, const Mat& d) const;

    // Inputs for `steps` x `batch` x F agent decisions; column (t * batch + b) * F + k.
    struct AgentBatch {
        int steps = 0;
        int batch = 0;
        Mat local;   // local planes
        Mat extras;  // id one-hot and urge
    };

    struct ClassPass {
        EntityClass entity_class{};
        std::vector<int> agents;
        Mat x, in_pre, in_act, ff_pre, hidden;
        std::vector<nn::Gru<double>::Cache> gru;
    };

    struct AgentPass {
        int steps = 0;
        int batch = 0;
        Mat q;       // action values, same column layout as the inputs
        Mat hidden;  // recurrent state after each step
        FeatureCache features;
        std::vector<ClassPass> classes;
        bool cached = false;
    };

    // Unrolls every agent over the steps; `initial_hidden` (hidden x batch*F) may be null for zeros.
    AgentPass agents_forward(const Params& p, const AgentBatch& in, bool keep_cache,
                             const Mat* initial_hidden = nullptr) const;
    // Gradients w.r.t. q and, optionally, hidden (empty matrix for none).
    void agents_backward(const Params& p, Params& g, const AgentPass& pass, const Mat& dq, const Mat& dhidden) const;

    // Layers, exposed for tests and the mixing heads.
    const nn::Conv2d<double>& global_conv() const { return global_conv_; }
    const nn::Conv2d<double>& local_conv() const { return local_conv_; }
    nn::Dense<double> fc_in(EntityClass c) const;
    nn::Gru<double> gru(EntityClass c) const;
    nn::Dense<double> feed_forward(EntityClass c) const;
    nn::Dense<double> fc_out(EntityClass c) const;
    nn::Dense<double> mixer_q_hidden() const;
    nn::Dense<double> mixer_q_out() const;
    nn::Dense<double> mixer_v_hidden() const;
    nn::Dense<double> mixer_v_out() const;

private:
    Mat features(const nn::Conv2d<double>& conv, const Params& p, const Mat& planes, FeatureCache* cache) const;
    void features_backward(const nn::Conv2d<double>& conv, const Params& p, Params& g, const FeatureCache& cache,
                           const Mat& d) const;
    nn::MaxPool2<double> pool_for(const nn::Conv2d<double>& conv) const;

    ModelConfig config_;
    std::vector<EntityClass> classes_;
    nn::Conv2d<double> global_conv_;
    nn::Conv2d<double> local_conv_;
};

std::string param_prefix(EntityClass c);

// Writes an observation into column `col` of the agent input matrices.
void fill_agent_inputs(const LocalObsTensor& obs, Mat& local, Mat& extras, Index col);

// Masked epsilon-greedy choice over flat cell indices. Argmax ties go to the
// lowest index. Throws std::invalid_argument on an empty mask.
int select_action_filtered(const Eigen::VectorXd& q, const std::vector<char>& mask, double epsilon, Rng& rng);

// Nearest-task heuristic: the reachable cell closest to any incomplete task of
// the entity's class (row-major tie-break); stays put when already on such a
// task or when none remain.
Cell greedy_policy(const World& world, int entity_id);

// The voluntary variant never forces UGVs; proposed actions pass through and the
// world runs with hard cooperation disabled.
JointAction voluntary_override_policy(const World& world, const JointAction& proposed);

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual void reset(const World& /*world*/) {}
    virtual JointAction act(const World& world, Rng& rng) = 0;
};

class GreedyPolicy : public Policy {
public:
    std::string name() const override { return "greedy"; }
    JointAction act(const World& world, Rng& rng) override;
};

class RandomPolicy : public Policy {
public:
    std::string name() const override { return "random"; }
    JointAction act(const World& world, Rng& rng) override;
};

// Decentralized execution of the learned agent networks: each agent sees only its
// own local observation and recurrent state.
class LearnedPolicy : public Policy {
public:
    LearnedPolicy(const Model& model, const Params& params, double epsilon);

    std::string name() const override { return "checkpoint"; }
    void reset(const World& world) override;
    JointAction act(const World& world, Rng& rng) override;

    void set_epsilon(double e) { epsilon_ = e; }
    double epsilon() const { return epsilon_; }
    const Mat& hidden() const { return hidden_; }
    const Mat& last_q() const { return last_q_; }

private:
    const Model& model_;
    const Params& params_;
    double epsilon_;
    Mat hidden_;
    Mat last_q_;
};

}  // namespace hecta
