#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace hecta {

using BeliefVector = Eigen::VectorXd;

// Small explicit single-agent POMDP. transition[a](s, s') and observation[a](s', o)
// are row-stochastic.
struct TinyModel {
    int states = 0;
    int actions = 0;
    int observations = 0;
    std::vector<Eigen::MatrixXd> transition;
    std::vector<Eigen::MatrixXd> observation;

    // Throws std::invalid_argument on shape errors, negative entries, or rows
    // not summing to 1 within 1e-12.
    void validate() const;
};

class InconsistentObservation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Action-observation pairs, oldest first.
using History = std::vector<std::pair<int, int>>;

BeliefVector belief_update(const BeliefVector& b, int action, int obs, const TinyModel& model);

inline constexpr double kMaxEnumerationTerms = 1e6;

// Exact posterior by summing over every state sequence consistent with the history.
BeliefVector brute_force_posterior(const History& history, const TinyModel& model, const BeliefVector& b0);

TinyModel random_tiny_model(int states, int actions, int observations, std::mt19937_64& rng);

// Text format:
//   states <n> / actions <n> / observations <n>
//   transition <a> followed by n rows, observation <a> followed by n rows.
// Lines starting with '#' are comments.
std::string save_tiny_model(const TinyModel& model);
TinyModel load_tiny_model(const std::string& text);

}  // namespace hecta
