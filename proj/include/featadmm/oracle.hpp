#pragma once

#include "featadmm/data.hpp"
#include "featadmm/functions.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace featadmm {

class UnsupportedError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

enum class OracleMethod {
    closed_form_ridge,
    proximal_gradient,  // accelerated, with restart; smooth loss
    primal_dual,        // Chambolle-Pock; non-smooth loss
};

std::string to_string(OracleMethod m);

/// Centralized minimizer of f(Ax - b) + sum_i r_i(x_i).
struct OracleSolution {
    Vector x_star;
    std::optional<Vector> mu_star;
    double objective_value = 0.0;
    OracleMethod method = OracleMethod::closed_form_ridge;
    int iterations_used = 0;
    bool converged = true;
};

/// f(Ax - b) + sum_i r_i(x_i), with x split by `sizes`.
double centralized_objective(const Matrix& a, const Vector& b, const FunctionSpec& f,
                             const std::vector<FunctionSpec>& regs, const std::vector<Eigen::Index>& sizes,
                             const Vector& x);

/// Closed form when f is a squared loss and every r_i a squared l2 penalty;
/// accelerated proximal gradient for other smooth losses; a primal-dual
/// splitting for non-smooth losses. Non-convergence within `max_iter` is
/// reported through `converged`, never thrown. `method` forces a path;
/// UnsupportedError if it does not apply.
OracleSolution solve_centralized(const Matrix& a, const Vector& b, const FunctionSpec& f,
                                 const std::vector<FunctionSpec>& regs, const std::vector<Eigen::Index>& sizes,
                                 double tol = 1e-10, int max_iter = 200000,
                                 std::optional<OracleMethod> method = std::nullopt);

OracleSolution solve_centralized(const FeaturePartition& fp, const FunctionSpec& f,
                                 const std::vector<FunctionSpec>& regs, double tol = 1e-10, int max_iter = 200000);

/// mu = grad f(A x - b), the common optimum all agents' mu_i converge to.
/// Throws UnsupportedError for non-smooth f.
Vector dual_optimum(const OracleSolution& sol, const Matrix& a, const Vector& b, const FunctionSpec& f);

/// Distance of 0 from A^T grad f(Ax - b) + subdiff r(x). Smooth f only.
double kkt_residual(const Matrix& a, const Vector& b, const FunctionSpec& f, const std::vector<FunctionSpec>& regs,
                    const std::vector<Eigen::Index>& sizes, const Vector& x);

/// x_star.csv, mu_star.csv (when present) and summary.txt holding
/// `objective,method,iterations`.
void save_oracle(const OracleSolution& sol, const std::filesystem::path& dir);

} // namespace featadmm
