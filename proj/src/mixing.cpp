#include "hecta/mixing.hpp"

#include <algorithm>
#include <stdexcept>

namespace hecta {

namespace {

struct HeadCache {
    Mat x;
    Mat pre;
};

// (F * hidden) x n: agent k's state occupies rows [k * hidden, (k + 1) * hidden).
Mat stack_hidden(const Mat& hidden, int F, Index n) {
    const Index h = hidden.rows();
    Mat out(F * h, n);
    for (Index i = 0; i < n; ++i)
        for (int k = 0; k < F; ++k) out.block(k * h, i, h, 1) = hidden.col(i * F + k);
    return out;
}

Mat unstack_hidden(const Mat& stacked, int F, Index h) {
    const Index n = stacked.cols();
    Mat out(h, n * F);
    for (Index i = 0; i < n; ++i)
        for (int k = 0; k < F; ++k) out.col(i * F + k) = stacked.block(k * h, i, h, 1);
    return out;
}

Mat one_hot(const std::vector<int>& actions, int F, int P, Index n) {
    if (static_cast<Index>(actions.size()) != n * F) throw std::invalid_argument("joint action has wrong length");
    Mat out = Mat::Zero(static_cast<Index>(F) * P, n);
    for (Index i = 0; i < n; ++i) {
        for (int k = 0; k < F; ++k) {
            const int a = actions[i * F + k];
            if (a < 0 || a >= P) throw std::invalid_argument("action index outside the grid");
            out(static_cast<Index>(k) * P + a, i) = 1.0;
        }
    }
    return out;
}

Mat q_head(const Model& model, const Params& p, const Mat& s, const Mat& H, const Mat& A, HeadCache* cache) {
    Mat x(s.rows() + H.rows() + A.rows(), s.cols());
    x << s, H, A;
    Mat pre = model.mixer_q_hidden().forward(p, x);
    Mat out = model.mixer_q_out().forward(p, nn::relu(pre));
    if (cache) *cache = {std::move(x), std::move(pre)};
    return out;
}

Mat v_head(const Model& model, const Params& p, const Mat& s, const Mat& H, HeadCache* cache) {
    Mat x(s.rows() + H.rows(), s.cols());
    x << s, H;
    Mat pre = model.mixer_v_hidden().forward(p, x);
    Mat out = model.mixer_v_out().forward(p, nn::relu(pre));
    if (cache) *cache = {std::move(x), std::move(pre)};
    return out;
}

Mat head_backward(const nn::Dense<double>& hidden_layer, const nn::Dense<double>& out_layer, const Params& p,
                  Params& g, const HeadCache& c, const Mat& dy) {
    const Mat dact = out_layer.backward(p, g, nn::relu(c.pre), dy);
    return hidden_layer.backward(p, g, c.x, nn::relu_backward(c.pre, dact));
}

void check_single(const Model& model, const GlobalStateTensor& state, const Mat& hidden,
                  const std::vector<int>& actions) {
    const auto& cfg = model.config();
    if (state.height != cfg.grid_height || state.width != cfg.grid_width ||
        state.planes.size() != kGlobalChannels * cfg.cells())
        throw std::invalid_argument("global state does not match the model grid");
    if (hidden.rows() != cfg.hidden || hidden.cols() != cfg.agent_count())
        throw std::invalid_argument("hidden states must be (hidden x agents)");
    if (static_cast<int>(actions.size()) != cfg.agent_count())
        throw std::invalid_argument("joint action must cover every agent");
}

}  // namespace

TotalValues eval_total(const Model& model, const Params& params, const GlobalStateTensor& state, const Mat& hidden,
                       const std::vector<int>& actions) {
    check_single(model, state, hidden, actions);
    const int F = model.config().agent_count();
    const Mat s = model.global_features(params, state.planes);
    const Mat H = stack_hidden(hidden, F, 1);
    const Mat A = one_hot(actions, F, model.action_count(), 1);
    return {q_head(model, params, s, H, A, nullptr)(0, 0), v_head(model, params, s, H, nullptr)(0, 0)};
}

double target_total(const Model& model, const Params& target, const GlobalStateTensor& state, const Mat& hidden,
                    const std::vector<int>& actions) {
    return eval_total(model, target, state, hidden, actions).q_tot;
}

double sum_q(const std::vector<double>& per_agent) {
    double s = 0.0;
    for (double q : per_agent) s += q;
    return s;
}

std::vector<int> masked_argmax_actions(const Mat& q, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& masks) {
    if (q.rows() != masks.rows() || q.cols() != masks.cols()) throw std::invalid_argument("mask shape mismatch");
    std::vector<int> out(q.cols(), 0);
    for (Index j = 0; j < q.cols(); ++j) {
        int best = -1;
        for (Index i = 0; i < q.rows(); ++i)
            if (masks(i, j) && (best < 0 || q(i, j) > q(best, j))) best = static_cast<int>(i);
        out[j] = std::max(best, 0);  // padding columns have empty masks
    }
    return out;
}

void sync_targets(const Params& eval, Params& target) { target = eval; }

LossResult compute_loss(const Model& model, const TrainingBatch& batch, const Params& eval, const Params& target,
                        const LossConfig& config, bool with_grad) {
    const int F = model.config().agent_count();
    const int P = model.action_count();
    const Index hid = model.config().hidden;
    const Index B = batch.batch, n = static_cast<Index>(batch.steps) * B;
    if (n == 0) throw std::invalid_argument("empty training batch");
    if (batch.reward.size() != n || batch.nonterminal.size() != n || batch.valid.size() != n ||
        batch.global.cols() != n)
        throw std::invalid_argument("training batch has inconsistent shape");
    const double valid_count = batch.valid.sum();
    if (valid_count <= 0) throw std::invalid_argument("training batch has no valid steps");

    const auto ep = model.agents_forward(eval, batch.agents, with_grad);
    Model::FeatureCache gcache;
    const Mat s = model.global_features(eval, batch.global, with_grad ? &gcache : nullptr);
    const auto tp = model.agents_forward(target, batch.agents, false);
    const Mat ts = model.global_features(target, batch.global);

    const std::vector<int> abar = masked_argmax_actions(ep.q, batch.masks);
    const Mat H = stack_hidden(ep.hidden, F, n);
    const Mat TH = stack_hidden(tp.hidden, F, n);
    const Mat A = one_hot(batch.actions, F, P, n);
    const Mat Abar = one_hot(abar, F, P, n);

    const Mat target_bar = q_head(model, target, ts, TH, Abar, nullptr);
    const Mat target_taken = q_head(model, target, ts, TH, A, nullptr);
    HeadCache qc, vc;
    const Mat qtot = q_head(model, eval, s, H, A, with_grad ? &qc : nullptr);
    const Mat v = v_head(model, eval, s, H, with_grad ? &vc : nullptr);

    Eigen::VectorXd td = Eigen::VectorXd::Zero(n), d_opt = Eigen::VectorXd::Zero(n),
                    d_nopt = Eigen::VectorXd::Zero(n);
    for (Index i = 0; i < n; ++i) {
        if (batch.valid(i) == 0.0) continue;
        double bootstrap = 0.0;
        if (batch.nonterminal(i) != 0.0) {
            if (i + B >= n || batch.valid(i + B) == 0.0)
                throw std::invalid_argument("non-terminal step without a successor");
            bootstrap = target_bar(0, i + B);
        }
        const double y = batch.reward(i) + config.gamma * batch.nonterminal(i) * bootstrap;
        td(i) = qtot(0, i) - y;
        double sum_bar = 0.0, sum_taken = 0.0;
        for (int k = 0; k < F; ++k) {
            sum_bar += ep.q(abar[i * F + k], i * F + k);
            sum_taken += ep.q(batch.actions[i * F + k], i * F + k);
        }
        d_opt(i) = sum_bar - target_bar(0, i) + v(0, i);
        d_nopt(i) = std::min(sum_taken - target_taken(0, i) + v(0, i), 0.0);
    }

    LossResult result;
    result.valid_steps = static_cast<int>(valid_count);
    result.l_td = td.squaredNorm() / valid_count;
    result.l_opt = d_opt.squaredNorm() / valid_count;
    result.l_nopt = d_nopt.squaredNorm() / valid_count;
    result.loss = result.l_td + config.lambda_opt * result.l_opt + config.lambda_nopt * result.l_nopt;
    if (!with_grad) return result;

    Params g = eval.zeros_like();
    Mat dqtot = (2.0 / valid_count) * td.transpose();
    Mat dv = ((2.0 / valid_count) * (config.lambda_opt * d_opt + config.lambda_nopt * d_nopt)).transpose();
    Mat dq = Mat::Zero(P, n * F);
    for (Index i = 0; i < n; ++i) {
        if (batch.valid(i) == 0.0) continue;
        const double g_bar = 2.0 * config.lambda_opt * d_opt(i) / valid_count;
        const double g_taken = 2.0 * config.lambda_nopt * d_nopt(i) / valid_count;
        for (int k = 0; k < F; ++k) {
            dq(abar[i * F + k], i * F + k) += g_bar;
            dq(batch.actions[i * F + k], i * F + k) += g_taken;
        }
    }

    const Mat dxq = head_backward(model.mixer_q_hidden(), model.mixer_q_out(), eval, g, qc, dqtot);
    const Mat dxv = head_backward(model.mixer_v_hidden(), model.mixer_v_out(), eval, g, vc, dv);
    const Index gs = s.rows();
    model.global_features_backward(eval, g, gcache, dxq.topRows(gs) + dxv.topRows(gs));
    Mat dH = dxq.middleRows(gs, F * hid);
    if (config.v_grad_to_hidden) dH += dxv.middleRows(gs, F * hid);
    model.agents_backward(eval, g, ep, dq, unstack_hidden(dH, F, hid));
    result.grads = std::move(g);
    return result;
}

}  // namespace hecta
