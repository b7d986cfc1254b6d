#pragma once

#include <vector>

#include "hecta/policy.hpp"

namespace hecta {

// Padded batch of whole episodes. Step-major columns: index t * batch + b for
// per-step data, (t * batch + b) * F + k for per-agent data.
struct TrainingBatch {
    int steps = 0;
    int batch = 0;
    Mat global;                      // global planes per step
    Model::AgentBatch agents;        // local observations
    std::vector<int> actions;        // executed cell index per agent decision
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> masks;  // cells x decisions
    Eigen::VectorXd reward;
    Eigen::VectorXd nonterminal;     // te: 0 on the last step of an episode
    Eigen::VectorXd valid;           // 0 on padding
};

struct TotalValues {
    double q_tot = 0.0;
    double v = 0.0;
};

// Centralized heads for one state. `hidden` is (hidden x F), `actions` flat cell indices.
TotalValues eval_total(const Model& model, const Params& params, const GlobalStateTensor& state, const Mat& hidden,
                       const std::vector<int>& actions);
double target_total(const Model& model, const Params& target, const GlobalStateTensor& state, const Mat& hidden,
                    const std::vector<int>& actions);
double sum_q(const std::vector<double>& per_agent);

struct LossConfig {
    double gamma = 0.7;
    double lambda_opt = 1.0;
    double lambda_nopt = 1.0;
    bool v_grad_to_hidden = false;  // V's gradient stops at the agent hidden states by default
};

struct LossResult {
    double loss = 0.0;
    double l_td = 0.0;
    double l_opt = 0.0;
    double l_nopt = 0.0;
    int valid_steps = 0;
    Params grads;  // empty layout when gradients were not requested
};

// Total loss L_td + lambda_opt L_opt + lambda_nopt L_nopt, averaged over valid
// steps, with gradients for the evaluation parameters only.
LossResult compute_loss(const Model& model, const TrainingBatch& batch, const Params& eval, const Params& target,
                        const LossConfig& config, bool with_grad = true);

// Joint action whose entries maximize each agent's own q over its mask.
std::vector<int> masked_argmax_actions(const Mat& q, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& masks);

void sync_targets(const Params& eval, Params& target);

}  // namespace hecta
