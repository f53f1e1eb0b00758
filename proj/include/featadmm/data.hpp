#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

namespace featadmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Column blocks A_1..A_N of a data matrix, the response b and, for
/// synthetic data, the generating model.
struct FeaturePartition {
    std::vector<Matrix> blocks;
    Vector response;
    std::optional<Vector> truth;
    std::uint64_t seed = 0;  // recorded in meta.txt, 0 for loaded data

    int num_agents() const noexcept { return static_cast<int>(blocks.size()); }
    Eigen::Index num_samples() const noexcept { return response.size(); }
    Eigen::Index num_features() const noexcept;
    std::vector<Eigen::Index> sizes() const;
    /// Offset of block i (0-based) in the stacked model vector.
    Eigen::Index offset(int block) const;

    /// [A_1, ..., A_N]
    Matrix concatenate() const;

    /// Throws DataError when block row counts, response length or truth
    /// length are inconsistent.
    void validate() const;
};

/// Synthetic linear model: A ~ N(0,1) entrywise, truth ~ N(0, I_P),
/// noise ~ N(0, noise_variance I_M), b = A truth + noise.
FeaturePartition synthesize(int num_agents, Eigen::Index num_samples,
                            const std::vector<Eigen::Index>& sizes, double noise_variance,
                            std::uint64_t seed);

FeaturePartition partition_columns(const Matrix& a, const Vector& b,
                                   const std::vector<Eigen::Index>& sizes);

/// Comma separated values, one row per line, no header.
Matrix load_matrix_csv(const std::filesystem::path& path);
void save_matrix_csv(const Matrix& m, const std::filesystem::path& path);
Vector load_vector_csv(const std::filesystem::path& path);
void save_vector_csv(const Vector& v, const std::filesystem::path& path);

/// Directory layout: block_001.csv ... block_NNN.csv, b.csv, optional
/// truth.csv, meta.txt.
void save_partition(const FeaturePartition& fp, const std::filesystem::path& dir);
FeaturePartition load_partition(const std::filesystem::path& dir);

} // namespace featadmm
