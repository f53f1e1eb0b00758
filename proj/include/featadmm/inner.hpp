#pragma once

#include "featadmm/functions.hpp"

#include <Eigen/Dense>

#include <vector>

namespace featadmm {

using Matrix = Eigen::MatrixXd;

/// Multipliers of the per-round local subproblem: theta for the coupling
/// A_i^T mu + nu = 0, beta for mu = alpha.
struct BcdState {
    Vector theta;
    Vector beta;

    static BcdState zeros(Eigen::Index local_features, Eigen::Index samples) {
        return {Vector::Zero(local_features), Vector::Zero(samples)};
    }
};

enum class StepRule {
    fixed_lipschitz,         // proximal gradient with step 1/L; needs a smooth loss
    diminishing_subgradient  // proximal subgradient with steps c/sqrt(t)
};

struct BcdConfig {
    int sweeps = 2;
    int theta_budget = 200;
    double theta_tolerance = 1e-8;
    StepRule step_rule = StepRule::fixed_lipschitz;
    double subgradient_scale = 0.1;

    void validate() const;
};

/// An agent's column block with the quantities the theta solver reuses every
/// round: the Gram matrix A^T A and its largest eigenvalue.
class LocalBlock {
public:
    explicit LocalBlock(Matrix a);

    const Matrix& matrix() const noexcept { return a_; }
    const Matrix& gram() const noexcept { return gram_; }
    double gram_lambda_max() const noexcept { return lambda_max_; }
    Eigen::Index samples() const noexcept { return a_.rows(); }
    Eigen::Index features() const noexcept { return a_.cols(); }

private:
    Matrix a_;
    Matrix gram_;
    double lambda_max_;
};

/// The loss as it enters one agent's subproblem, h(e) = f(N e) / N.
///
/// This is what the per-agent conjugate f^*(mu)/N dualizes back to. For the
/// squared loss it is N f(e).
double agent_loss(const FunctionSpec& f, const Vector& e, int num_agents);

/// beta minimizing ||beta||^2 / (4 rho_bar) + h(q - beta), computed as
/// q - prox_{2 rho_bar h}(q).
Vector beta_update(const FunctionSpec& f, const Vector& q, double rho_bar, int num_agents);

struct ThetaResult {
    Vector theta;
    bool converged = false;
    int iterations = 0;
};

/// Approximately minimizes r(-theta) + h(q_prime - A theta).
///
/// Works on phi = -theta. Proximal gradient when f is smooth and the step
/// rule allows it, proximal subgradient with the best iterate kept
/// otherwise. Never increases the objective relative to `init`.
ThetaResult theta_update(const FunctionSpec& f, const FunctionSpec& r, const LocalBlock& block,
                         const Vector& q_prime, int num_agents, const Vector& init, const BcdConfig& cfg);

/// delta_k(theta, beta) = -r(-theta) - ||beta||^2/(4 rho_bar)
///                        - h(-c - A theta - b/N - beta)
double delta_value(const FunctionSpec& f, const FunctionSpec& r, const Vector& c_prev, const Matrix& a,
                   const Vector& b, int num_agents, double rho_bar, const Vector& theta, const Vector& beta);

struct BcdResult {
    BcdState state;
    /// delta_k before the first sweep and after every half step, 2T+1 values.
    std::vector<double> delta_trace;
    bool theta_converged = true;
};

/// T sweeps of theta_update followed by beta_update, starting from `warm`.
BcdResult bcd_solve(const FunctionSpec& f, const FunctionSpec& r, const LocalBlock& block, const Vector& c_prev,
                    const Vector& b, int num_agents, double rho_bar, const BcdState& warm, const BcdConfig& cfg);

} // namespace featadmm
