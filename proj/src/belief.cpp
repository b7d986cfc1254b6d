#include "hecta/belief.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace hecta {

namespace {

void check_stochastic(const Eigen::MatrixXd& m, int rows, int cols, const std::string& what) {
    if (m.rows() != rows || m.cols() != cols) throw std::invalid_argument(what + " has the wrong shape");
    if ((m.array() < 0.0).any() || !m.allFinite()) throw std::invalid_argument(what + " has invalid entries");
    for (int r = 0; r < rows; ++r)
        if (std::abs(m.row(r).sum() - 1.0) > 1e-12)
            throw std::invalid_argument(what + " row " + std::to_string(r) + " does not sum to 1");
}

void check_belief(const BeliefVector& b, const TinyModel& model) {
    if (b.size() != model.states) throw std::invalid_argument("belief length differs from the state count");
}

}  // namespace

void TinyModel::validate() const {
    if (states <= 0 || actions <= 0 || observations <= 0) throw std::invalid_argument("tiny model sizes must be positive");
    if (static_cast<int>(transition.size()) != actions || static_cast<int>(observation.size()) != actions)
        throw std::invalid_argument("one transition and observation table per action");
    for (int a = 0; a < actions; ++a) {
        check_stochastic(transition[a], states, states, "transition " + std::to_string(a));
        check_stochastic(observation[a], states, observations, "observation " + std::to_string(a));
    }
}

BeliefVector belief_update(const BeliefVector& b, int action, int obs, const TinyModel& model) {
    check_belief(b, model);
    if (action < 0 || action >= model.actions) throw std::invalid_argument("action out of range");
    if (obs < 0 || obs >= model.observations) throw std::invalid_argument("observation out of range");
    const BeliefVector predicted = model.transition[action].transpose() * b;
    BeliefVector post = model.observation[action].col(obs).cwiseProduct(predicted);
    const double z = post.sum();
    if (!(z > 0.0)) throw InconsistentObservation("observation has zero probability under the belief");
    return post / z;
}

BeliefVector brute_force_posterior(const History& history, const TinyModel& model, const BeliefVector& b0) {
    check_belief(b0, model);
    const int S = model.states;
    const std::size_t n = history.size();
    if (std::pow(static_cast<double>(S), static_cast<double>(n + 1)) > kMaxEnumerationTerms)
        throw std::invalid_argument("history too long to enumerate");
    for (const auto& [a, o] : history) {
        if (a < 0 || a >= model.actions) throw std::invalid_argument("action out of range");
        if (o < 0 || o >= model.observations) throw std::invalid_argument("observation out of range");
    }

    BeliefVector post = BeliefVector::Zero(S);
    std::vector<int> seq(n + 1, 0);  // odometer over s_0 .. s_n
    while (true) {
        double w = b0(seq[0]);
        for (std::size_t i = 0; i < n && w != 0.0; ++i) {
            const auto [a, o] = history[i];
            w *= model.transition[a](seq[i], seq[i + 1]) * model.observation[a](seq[i + 1], o);
        }
        post(seq[n]) += w;
        std::size_t d = 0;
        while (d <= n && ++seq[d] == S) seq[d++] = 0;
        if (d > n) break;
    }
    const double z = post.sum();
    if (!(z > 0.0)) throw InconsistentObservation("history has zero probability under the prior");
    return post / z;
}

TinyModel random_tiny_model(int states, int actions, int observations, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto stochastic = [&](int rows, int cols) {
        Eigen::MatrixXd m(rows, cols);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) m(r, c) = u(rng) + 1e-3;
            m.row(r) /= m.row(r).sum();
        }
        return m;
    };
    TinyModel model{states, actions, observations, {}, {}};
    for (int a = 0; a < actions; ++a) {
        model.transition.push_back(stochastic(states, states));
        model.observation.push_back(stochastic(states, observations));
    }
    return model;
}

std::string save_tiny_model(const TinyModel& model) {
    model.validate();
    std::ostringstream out;
    out << std::setprecision(17);
    out << "states " << model.states << "\nactions " << model.actions << "\nobservations " << model.observations
        << "\n";
    auto rows = [&](const Eigen::MatrixXd& m) {
        for (int r = 0; r < m.rows(); ++r) {
            for (int c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
            out << "\n";
        }
    };
    for (int a = 0; a < model.actions; ++a) {
        out << "transition " << a << "\n";
        rows(model.transition[a]);
        out << "observation " << a << "\n";
        rows(model.observation[a]);
    }
    return out.str();
}

TinyModel load_tiny_model(const std::string& text) {
    std::istringstream lines(text);
    std::ostringstream cleaned;
    for (std::string line; std::getline(lines, line);) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        cleaned << line << "\n";
    }
    std::istringstream in(cleaned.str());
    auto expect = [&](const std::string& key) {
        std::string word;
        if (!(in >> word) || word != key) throw std::invalid_argument("tiny model: expected '" + key + "'");
        int v;
        if (!(in >> v)) throw std::invalid_argument("tiny model: expected a number after '" + key + "'");
        return v;
    };
    TinyModel m;
    m.states = expect("states");
    m.actions = expect("actions");
    m.observations = expect("observations");
    if (m.states <= 0 || m.actions <= 0 || m.observations <= 0)
        throw std::invalid_argument("tiny model sizes must be positive");
    m.transition.assign(m.actions, Eigen::MatrixXd());
    m.observation.assign(m.actions, Eigen::MatrixXd());
    auto read_matrix = [&](int rows, int cols) {
        Eigen::MatrixXd x(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                if (!(in >> x(r, c))) throw std::invalid_argument("tiny model: matrix truncated");
        return x;
    };
    for (int i = 0; i < 2 * m.actions; ++i) {
        std::string word;
        int a;
        if (!(in >> word >> a) || a < 0 || a >= m.actions)
            throw std::invalid_argument("tiny model: expected a table header");
        if (word == "transition")
            m.transition[a] = read_matrix(m.states, m.states);
        else if (word == "observation")
            m.observation[a] = read_matrix(m.states, m.observations);
        else
            throw std::invalid_argument("tiny model: unknown table '" + word + "'");
    }
    m.validate();
    return m;
}

}  // namespace hecta
