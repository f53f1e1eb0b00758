#include "featadmm/inner.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace featadmm {

void BcdConfig::validate() const {
    if (sweeps < 1) throw std::invalid_argument("bcd: sweeps must be at least 1");
    if (theta_budget < 1) throw std::invalid_argument("bcd: theta budget must be at least 1");
    if (!(theta_tolerance > 0.0)) throw std::invalid_argument("bcd: theta tolerance must be positive");
    if (!(subgradient_scale > 0.0)) throw std::invalid_argument("bcd: subgradient scale must be positive");
}

LocalBlock::LocalBlock(Matrix a) : a_(std::move(a)), gram_(a_.transpose() * a_) {
    if (gram_.size() == 0) {
        lambda_max_ = 0.0;
    } else {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(gram_, Eigen::EigenvaluesOnly);
        lambda_max_ = std::max(0.0, eig.eigenvalues().maxCoeff());
    }
}

double agent_loss(const FunctionSpec& f, const Vector& e, int num_agents) {
    const double n = num_agents;
    return f.value(n * e) / n;
}

Vector beta_update(const FunctionSpec& f, const Vector& q, double rho_bar, int num_agents) {
    if (!(rho_bar > 0.0)) throw std::invalid_argument("beta_update: rho_bar must be positive");
    const double n = num_agents;
    // prox_{lam h}(q) = prox_{lam N f}(N q) / N
    Vector s = f.prox(2.0 * rho_bar * n, n * q) / n;
    return q - s;
}

namespace {

double theta_objective(const FunctionSpec& f, const FunctionSpec& r, const LocalBlock& block, const Vector& q_prime,
                       int num_agents, const Vector& phi) {
    return r.value(phi) + agent_loss(f, q_prime + block.matrix() * phi, num_agents);
}

ThetaResult proximal_gradient(const FunctionSpec& f, const FunctionSpec& r, const LocalBlock& block,
                              const Vector& q_prime, int num_agents, const Vector& phi0, const BcdConfig& cfg) {
    // Smooth loss w||e||^2: grad_phi h(q' + A phi) = 2 w N (A^T q' + G phi).
    const double n = num_agents;
    const double w = f.l2_weight();
    const double lipschitz = 2.0 * w * n * block.gram_lambda_max();
    ThetaResult out;
    if (!(lipschitz > 0.0)) {
        // Loss term is constant in phi; r is minimized at 0 for every kind.
        out.theta = Vector::Zero(block.features());
        out.converged = true;
        return out;
    }
    const double step = 1.0 / lipschitz;
    const Vector atq = block.matrix().transpose() * q_prime;
    Vector phi = phi0;
    for (int t = 1; t <= cfg.theta_budget; ++t) {
        Vector grad = (2.0 * w * n) * (atq + block.gram() * phi);
        Vector next = r.prox(step, phi - step * grad);
        const double moved = (next - phi).norm();
        const double scale = std::max(1.0, phi.norm());
        phi = std::move(next);
        out.iterations = t;
        if (moved <= cfg.theta_tolerance * scale) {
            out.converged = true;
            break;
        }
    }
    out.theta = -phi;
    return out;
}

ThetaResult proximal_subgradient(const FunctionSpec& f, const FunctionSpec& r, const LocalBlock& block,
                                 const Vector& q_prime, int num_agents, const Vector& phi0, const BcdConfig& cfg) {
    const double n = num_agents;
    const Matrix& a = block.matrix();
    Vector phi = phi0;
    Vector best = phi0;
    double best_value = theta_objective(f, r, block, q_prime, num_agents, phi0);
    ThetaResult out;
    for (int t = 1; t <= cfg.theta_budget; ++t) {
        // d/dphi h(q' + A phi) contains A^T df(N (q' + A phi)).
        Vector g = a.transpose() * f.subgradient(n * (q_prime + a * phi));
        const double gnorm = g.norm();
        const double step = cfg.subgradient_scale / std::sqrt(static_cast<double>(t));
        Vector next = gnorm > 0.0 ? Vector(phi - (step / gnorm) * g) : phi;
        next = r.prox(gnorm > 0.0 ? step / gnorm : step, next);
        const double moved = (next - phi).norm();
        phi = std::move(next);
        out.iterations = t;
        const double value = theta_objective(f, r, block, q_prime, num_agents, phi);
        if (value < best_value) {
            best_value = value;
            best = phi;
        }
        if (moved <= cfg.theta_tolerance * std::max(1.0, phi.norm())) {
            out.converged = true;
            break;
        }
    }
    out.theta = -best;
    return out;
}

} // namespace

ThetaResult theta_update(const FunctionSpec& f, const FunctionSpec& r, const LocalBlock& block,
                         const Vector& q_prime, int num_agents, const Vector& init, const BcdConfig& cfg) {
    if (init.size() != block.features()) throw std::invalid_argument("theta_update: init has wrong length");
    if (q_prime.size() != block.samples()) throw std::invalid_argument("theta_update: q' has wrong length");
    const Vector phi0 = -init;
    if (f.is_smooth() && cfg.step_rule == StepRule::fixed_lipschitz) {
        return proximal_gradient(f, r, block, q_prime, num_agents, phi0, cfg);
    }
    return proximal_subgradient(f, r, block, q_prime, num_agents, phi0, cfg);
}

double delta_value(const FunctionSpec& f, const FunctionSpec& r, const Vector& c_prev, const Matrix& a,
                   const Vector& b, int num_agents, double rho_bar, const Vector& theta, const Vector& beta) {
    const double n = num_agents;
    const Vector w = -c_prev - a * theta - b / n - beta;
    return -r.value(-theta) - beta.squaredNorm() / (4.0 * rho_bar) - agent_loss(f, w, num_agents);
}

BcdResult bcd_solve(const FunctionSpec& f, const FunctionSpec& r, const LocalBlock& block, const Vector& c_prev,
                    const Vector& b, int num_agents, double rho_bar, const BcdState& warm, const BcdConfig& cfg) {
    cfg.validate();
    if (warm.theta.size() != block.features() || warm.beta.size() != block.samples()) {
        throw std::invalid_argument("bcd_solve: warm state does not match the block dimensions");
    }
    const double n = num_agents;
    const Matrix& a = block.matrix();
    const Vector base = -c_prev - b / n;

    BcdResult out;
    out.state = warm;
    auto& theta = out.state.theta;
    auto& beta = out.state.beta;
    out.delta_trace.reserve(static_cast<std::size_t>(2 * cfg.sweeps + 1));
    out.delta_trace.push_back(delta_value(f, r, c_prev, a, b, num_agents, rho_bar, theta, beta));
    for (int t = 0; t < cfg.sweeps; ++t) {
        auto th = theta_update(f, r, block, base - beta, num_agents, theta, cfg);
        theta = std::move(th.theta);
        out.theta_converged = out.theta_converged && th.converged;
        out.delta_trace.push_back(delta_value(f, r, c_prev, a, b, num_agents, rho_bar, theta, beta));

        beta = beta_update(f, base - a * theta, rho_bar, num_agents);
        out.delta_trace.push_back(delta_value(f, r, c_prev, a, b, num_agents, rho_bar, theta, beta));
    }
    return out;
}

} // namespace featadmm
