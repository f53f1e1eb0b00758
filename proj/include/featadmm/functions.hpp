#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace featadmm {

using Vector = Eigen::VectorXd;

class NonSmoothError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class SpecParseError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class FunctionKind {
    squared_l2_loss,  // e -> ||e||^2
    abs_l1_loss,      // e -> ||e||_1
    squared_l2_reg,   // x -> eta ||x||^2
    l1_reg,           // x -> eta ||x||_1
    elastic_net_reg,  // x -> eta1 ||x||_1 + eta2 ||x||^2
};

/// A convex, proper, closed function of a vector, usable as the loss f or as
/// a regularizer r_i. Every kind has a closed-form proximal operator.
class FunctionSpec {
public:
    static FunctionSpec squared_l2_loss() { return {FunctionKind::squared_l2_loss, 0.0, 1.0}; }
    static FunctionSpec abs_l1_loss() { return {FunctionKind::abs_l1_loss, 1.0, 0.0}; }
    static FunctionSpec squared_l2_reg(double eta) { return {FunctionKind::squared_l2_reg, 0.0, eta}; }
    static FunctionSpec l1_reg(double eta) { return {FunctionKind::l1_reg, eta, 0.0}; }
    static FunctionSpec elastic_net(double eta1, double eta2) {
        return {FunctionKind::elastic_net_reg, eta1, eta2};
    }

    FunctionKind kind() const noexcept { return kind_; }
    /// Weight on the l1 term (1 for abs_l1_loss).
    double l1_weight() const noexcept { return l1_; }
    /// Weight on the squared l2 term (1 for squared_l2_loss).
    double l2_weight() const noexcept { return l2_; }

    /// Differentiable everywhere.
    bool is_smooth() const noexcept { return l1_weight() == 0.0; }
    /// Lipschitz constant of the gradient for smooth kinds, 0 otherwise.
    double gradient_lipschitz() const noexcept { return is_smooth() ? 2.0 * l2_weight() : 0.0; }

    double value(const Vector& v) const;
    /// Throws NonSmoothError if any coordinate sits on the l1 kink.
    Vector gradient(const Vector& v) const;
    /// Minimal-norm element of the subdifferential.
    Vector subgradient(const Vector& v) const;
    /// argmin_s { lambda * spec(s) + 0.5 ||s - q||^2 }, lambda > 0.
    Vector prox(double lambda, const Vector& q) const;

    /// Distance from `g` to the subdifferential at `v`, coordinate-wise for
    /// the l1 part. Used for optimality certificates.
    double subdifferential_distance(const Vector& v, const Vector& g) const;

    std::string to_string() const;

    bool operator==(const FunctionSpec&) const = default;

private:
    FunctionSpec(FunctionKind k, double l1, double l2);

    // Every kind is l1_ ||x||_1 + l2_ ||x||^2 for some nonnegative pair.
    FunctionKind kind_;
    double l1_;
    double l2_;
};

/// Parses `squared_l2_loss`, `abs_l1_loss`, `l2_reg:eta=...`, `l1_reg:eta=...`
/// or `elastic_net:eta1=...,eta2=...`.
FunctionSpec parse_function_spec(std::string_view text);

/// Soft-thresholding, sign(q) max(|q| - t, 0).
Vector soft_threshold(const Vector& q, double t);

} // namespace featadmm
