#include "featadmm/oracle.hpp"

#include "featadmm/format.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <numeric>

namespace featadmm {

std::string to_string(OracleMethod m) {
    switch (m) {
    case OracleMethod::closed_form_ridge: return "closed-form-ridge";
    case OracleMethod::proximal_gradient: return "proximal-gradient";
    case OracleMethod::primal_dual: return "primal-dual";
    }
    return "?";
}

namespace {

void check_layout(const Matrix& a, const Vector& b, const std::vector<FunctionSpec>& regs,
                  const std::vector<Eigen::Index>& sizes) {
    if (a.rows() != b.size()) throw std::invalid_argument("oracle: A and b disagree on the sample count");
    if (regs.size() != sizes.size()) throw std::invalid_argument("oracle: one regularizer per block required");
    if (std::accumulate(sizes.begin(), sizes.end(), Eigen::Index{0}) != a.cols()) {
        throw std::invalid_argument("oracle: block sizes do not add up to the column count");
    }
}

Vector prox_blocks(const std::vector<FunctionSpec>& regs, const std::vector<Eigen::Index>& sizes, double lambda,
                   const Vector& q) {
    Vector out(q.size());
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < regs.size(); ++i) {
        out.segment(off, sizes[i]) = regs[i].prox(lambda, q.segment(off, sizes[i]));
        off += sizes[i];
    }
    return out;
}

double lambda_max_gram(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Matrix g = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
    return std::max(0.0, eig.eigenvalues().maxCoeff());
}

OracleSolution closed_form(const Matrix& a, const Vector& b, const FunctionSpec& f,
                           const std::vector<FunctionSpec>& regs, const std::vector<Eigen::Index>& sizes) {
    // grad: 2w A^T(Ax - b) + 2 D x = 0  =>  (w A^T A + D) x = w A^T b
    const double w = f.l2_weight();
    Matrix h = w * (a.transpose() * a);
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < regs.size(); ++i) {
        h.diagonal().segment(off, sizes[i]).array() += regs[i].l2_weight();
        off += sizes[i];
    }
    Vector rhs = w * (a.transpose() * b);
    OracleSolution sol;
    Eigen::LDLT<Matrix> ldlt(h);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-14) {
        sol.x_star = ldlt.solve(rhs);
    } else {
        sol.x_star = h.completeOrthogonalDecomposition().solve(rhs);
    }
    sol.method = OracleMethod::closed_form_ridge;
    sol.iterations_used = 0;
    return sol;
}

OracleSolution accelerated_proximal_gradient(const Matrix& a, const Vector& b, const FunctionSpec& f,
                                             const std::vector<FunctionSpec>& regs,
                                             const std::vector<Eigen::Index>& sizes, double tol, int max_iter) {
    const double w = f.l2_weight();
    const double lipschitz = 2.0 * w * lambda_max_gram(a);
    OracleSolution sol;
    sol.method = OracleMethod::proximal_gradient;
    if (!(lipschitz > 0.0)) {
        sol.x_star = Vector::Zero(a.cols());
        return sol;
    }
    const double step = 1.0 / lipschitz;
    auto grad = [&](const Vector& x) -> Vector { return (2.0 * w) * (a.transpose() * (a * x - b)); };
    auto objective = [&](const Vector& x) { return centralized_objective(a, b, f, regs, sizes, x); };

    Vector x = Vector::Zero(a.cols());
    Vector y = x;
    double t = 1.0;
    double fx = objective(x);
    sol.converged = false;
    for (int k = 1; k <= max_iter; ++k) {
        Vector next = prox_blocks(regs, sizes, step, y - step * grad(y));
        const double fnext = objective(next);
        if (fnext > fx && y != x) {
            // Restart momentum from the last accepted point. A plain step
            // from x is always accepted; increases there are rounding.
            t = 1.0;
            y = x;
            sol.iterations_used = k;
            continue;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = next + ((t - 1.0) / t_next) * (next - x);
        x = std::move(next);
        fx = fnext;
        t = t_next;
        sol.iterations_used = k;
        Vector mapped = prox_blocks(regs, sizes, step, x - step * grad(x));
        if (lipschitz * (x - mapped).norm() <= tol) {
            sol.converged = true;
            break;
        }
    }
    sol.x_star = std::move(x);
    return sol;
}

OracleSolution primal_dual(const Matrix& a, const Vector& b, const FunctionSpec& f,
                           const std::vector<FunctionSpec>& regs, const std::vector<Eigen::Index>& sizes, double tol,
                           int max_iter) {
    // min_x r(x) + g(Ax), g(z) = f(z - b). prox of sigma g^* through the
    // Moreau decomposition, so f's conjugate is never formed.
    const double norm_a = std::sqrt(lambda_max_gram(a));
    OracleSolution sol;
    sol.method = OracleMethod::primal_dual;
    sol.converged = false;
    if (!(norm_a > 0.0)) {
        sol.x_star = Vector::Zero(a.cols());
        sol.converged = true;
        return sol;
    }
    double gamma = std::numeric_limits<double>::infinity();
    for (const auto& r : regs) gamma = std::min(gamma, 2.0 * r.l2_weight());

    double tau = 0.99 / norm_a;
    double sigma = 0.99 / norm_a;
    Vector x = Vector::Zero(a.cols());
    Vector xbar = x;
    Vector y = Vector::Zero(a.rows());
    for (int k = 1; k <= max_iter; ++k) {
        const Vector y_old = y;
        const Vector x_old = x;
        Vector v = y + sigma * (a * xbar);
        Vector u = v / sigma;
        y = v - sigma * (b + f.prox(1.0 / sigma, u - b));
        x = prox_blocks(regs, sizes, tau, x - tau * (a.transpose() * y));
        const double theta = gamma > 0.0 ? 1.0 / std::sqrt(1.0 + 2.0 * gamma * tau) : 1.0;
        const double tau_used = tau, sigma_used = sigma;
        tau *= theta;
        sigma /= theta;
        xbar = x + theta * (x - x_old);
        sol.iterations_used = k;

        const Vector dx = x_old - x;
        const Vector dy = y_old - y;
        const double primal_res = (dx / tau_used - a.transpose() * dy).norm();
        const double dual_res = (dy / sigma_used - a * dx).norm();
        const double scale = std::max(1.0, (a.transpose() * y).norm());
        if (k > 10 && std::max(primal_res, dual_res) <= tol * scale) {
            sol.converged = true;
            break;
        }
    }
    sol.x_star = std::move(x);
    return sol;
}

} // namespace

double centralized_objective(const Matrix& a, const Vector& b, const FunctionSpec& f,
                             const std::vector<FunctionSpec>& regs, const std::vector<Eigen::Index>& sizes,
                             const Vector& x) {
    double out = f.value(a * x - b);
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < regs.size(); ++i) {
        out += regs[i].value(x.segment(off, sizes[i]));
        off += sizes[i];
    }
    return out;
}

OracleSolution solve_centralized(const Matrix& a, const Vector& b, const FunctionSpec& f,
                                 const std::vector<FunctionSpec>& regs, const std::vector<Eigen::Index>& sizes,
                                 double tol, int max_iter, std::optional<OracleMethod> method) {
    check_layout(a, b, regs, sizes);
    if (!(tol > 0.0) || max_iter < 1) throw std::invalid_argument("oracle: tol must be positive, max_iter >= 1");

    const bool quadratic_regs =
        std::all_of(regs.begin(), regs.end(), [](const FunctionSpec& r) { return r.l1_weight() == 0.0; });
    const bool closed_ok = f.is_smooth() && f.l2_weight() > 0.0 && quadratic_regs;
    if (!method) {
        method = closed_ok ? OracleMethod::closed_form_ridge
                 : f.is_smooth() ? OracleMethod::proximal_gradient
                                 : OracleMethod::primal_dual;
    }
    if ((*method == OracleMethod::closed_form_ridge && !closed_ok) ||
        (*method == OracleMethod::proximal_gradient && !f.is_smooth())) {
        throw UnsupportedError("oracle: method " + to_string(*method) + " does not apply to this problem");
    }
    OracleSolution sol;
    if (*method == OracleMethod::closed_form_ridge) {
        sol = closed_form(a, b, f, regs, sizes);
    } else if (*method == OracleMethod::proximal_gradient) {
        sol = accelerated_proximal_gradient(a, b, f, regs, sizes, tol, max_iter);
    } else {
        sol = primal_dual(a, b, f, regs, sizes, tol, max_iter);
    }
    sol.objective_value = centralized_objective(a, b, f, regs, sizes, sol.x_star);
    if (f.is_smooth()) sol.mu_star = dual_optimum(sol, a, b, f);
    return sol;
}

OracleSolution solve_centralized(const FeaturePartition& fp, const FunctionSpec& f,
                                 const std::vector<FunctionSpec>& regs, double tol, int max_iter) {
    return solve_centralized(fp.concatenate(), fp.response, f, regs, fp.sizes(), tol, max_iter);
}

Vector dual_optimum(const OracleSolution& sol, const Matrix& a, const Vector& b, const FunctionSpec& f) {
    if (!f.is_smooth()) {
        throw UnsupportedError("dual optimum needs a differentiable loss; " + f.to_string() + " is not");
    }
    return f.gradient(a * sol.x_star - b);
}

double kkt_residual(const Matrix& a, const Vector& b, const FunctionSpec& f, const std::vector<FunctionSpec>& regs,
                    const std::vector<Eigen::Index>& sizes, const Vector& x) {
    check_layout(a, b, regs, sizes);
    if (!f.is_smooth()) throw UnsupportedError("kkt_residual needs a differentiable loss");
    const Vector g = a.transpose() * f.gradient(a * x - b);
    double sq = 0.0;
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < regs.size(); ++i) {
        const double d = regs[i].subdifferential_distance(x.segment(off, sizes[i]), -g.segment(off, sizes[i]));
        sq += d * d;
        off += sizes[i];
    }
    return std::sqrt(sq);
}

void save_oracle(const OracleSolution& sol, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_vector_csv(sol.x_star, dir / "x_star.csv");
    if (sol.mu_star) save_vector_csv(*sol.mu_star, dir / "mu_star.csv");
    std::ofstream out(dir / "summary.txt");
    if (!out) throw std::runtime_error("cannot write " + (dir / "summary.txt").string());
    out << "objective,method,iterations\n"
        << format_double(sol.objective_value) << ',' << to_string(sol.method) << ',' << sol.iterations_used << '\n';
}

} // namespace featadmm
