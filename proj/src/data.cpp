#include "featadmm/data.hpp"

#include "featadmm/format.hpp"

#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

namespace featadmm {

Eigen::Index FeaturePartition::num_features() const noexcept {
    Eigen::Index p = 0;
    for (const auto& blk : blocks) p += blk.cols();
    return p;
}

std::vector<Eigen::Index> FeaturePartition::sizes() const {
    std::vector<Eigen::Index> out;
    out.reserve(blocks.size());
    for (const auto& blk : blocks) out.push_back(blk.cols());
    return out;
}

Eigen::Index FeaturePartition::offset(int block) const {
    Eigen::Index off = 0;
    for (int i = 0; i < block; ++i) off += blocks[static_cast<std::size_t>(i)].cols();
    return off;
}

Matrix FeaturePartition::concatenate() const {
    Matrix a(num_samples(), num_features());
    Eigen::Index off = 0;
    for (const auto& blk : blocks) {
        a.middleCols(off, blk.cols()) = blk;
        off += blk.cols();
    }
    return a;
}

void FeaturePartition::validate() const {
    if (blocks.empty()) throw DataError("partition has no blocks");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].rows() != response.size()) {
            throw DataError("block " + std::to_string(i + 1) + " has " + std::to_string(blocks[i].rows()) +
                            " rows, response has " + std::to_string(response.size()));
        }
        if (blocks[i].cols() < 1) throw DataError("block " + std::to_string(i + 1) + " has no columns");
    }
    if (truth && truth->size() != num_features()) {
        throw DataError("truth length " + std::to_string(truth->size()) + " does not match " +
                        std::to_string(num_features()) + " features");
    }
}

FeaturePartition synthesize(int num_agents, Eigen::Index num_samples,
                            const std::vector<Eigen::Index>& sizes, double noise_variance,
                            std::uint64_t seed) {
    if (num_agents < 1) throw DataError("synthesize: need at least one agent");
    if (num_samples < 1) throw DataError("synthesize: need at least one sample");
    if (static_cast<int>(sizes.size()) != num_agents) {
        throw DataError("synthesize: " + std::to_string(sizes.size()) + " block sizes for " +
                        std::to_string(num_agents) + " agents");
    }
    for (auto p : sizes)
        if (p < 1) throw DataError("synthesize: block sizes must be positive");
    if (!(noise_variance >= 0.0)) throw DataError("synthesize: noise variance must be nonnegative");

    const Eigen::Index p = std::accumulate(sizes.begin(), sizes.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Matrix a(num_samples, p);
    for (Eigen::Index r = 0; r < num_samples; ++r)
        for (Eigen::Index c = 0; c < p; ++c) a(r, c) = normal(rng);
    Vector omega(p);
    for (auto& w : omega) w = normal(rng);
    const double sd = std::sqrt(noise_variance);
    Vector noise(num_samples);
    for (auto& e : noise) e = sd * normal(rng);

    Vector b = a * omega + noise;
    auto fp = partition_columns(a, b, sizes);
    fp.truth = std::move(omega);
    fp.seed = seed;
    return fp;
}

FeaturePartition partition_columns(const Matrix& a, const Vector& b,
                                   const std::vector<Eigen::Index>& sizes) {
    if (a.rows() != b.size()) {
        throw DataError("partition: matrix has " + std::to_string(a.rows()) + " rows, response has " +
                        std::to_string(b.size()));
    }
    const Eigen::Index total = std::accumulate(sizes.begin(), sizes.end(), Eigen::Index{0});
    if (total != a.cols()) {
        throw DataError("partition: block sizes sum to " + std::to_string(total) + " but matrix has " +
                        std::to_string(a.cols()) + " columns");
    }
    FeaturePartition fp;
    Eigen::Index off = 0;
    for (auto pi : sizes) {
        if (pi < 1) throw DataError("partition: block sizes must be positive");
        fp.blocks.push_back(a.middleCols(off, pi));
        off += pi;
    }
    fp.response = b;
    return fp;
}

namespace {

std::vector<std::vector<double>> read_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        for (;;) {
            auto comma = line.find(',', pos);
            auto end = comma == std::string::npos ? line.size() : comma;
            auto first = line.find_first_not_of(' ', pos);
            auto last = line.find_last_not_of(' ', end == 0 ? 0 : end - 1);
            double value = 0.0;
            if (first == std::string::npos || first >= end || last < first) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty field");
            }
            auto [ptr, ec] = std::from_chars(line.data() + first, line.data() + last + 1, value);
            if (ec != std::errc() || ptr != line.data() + last + 1) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad number `" +
                                line.substr(first, last + 1 - first) + "`");
            }
            row.push_back(value);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(rows.front().size()) + " columns, found " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path.string() + ": no data");
    return rows;
}

std::map<std::string, std::string> read_meta(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

} // namespace

Matrix load_matrix_csv(const std::filesystem::path& path) {
    auto rows = read_rows(path);
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

void save_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    std::string line;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        line.clear();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) line += ',';
            line += format_double(m(r, c));
        }
        line += '\n';
        out << line;
    }
}

Vector load_vector_csv(const std::filesystem::path& path) {
    Matrix m = load_matrix_csv(path);
    if (m.cols() != 1) throw DataError(path.string() + ": expected a single column");
    return m.col(0);
}

void save_vector_csv(const Vector& v, const std::filesystem::path& path) { save_matrix_csv(v, path); }

void save_partition(const FeaturePartition& fp, const std::filesystem::path& dir) {
    fp.validate();
    std::filesystem::create_directories(dir);
    for (int i = 0; i < fp.num_agents(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "block_%03d.csv", i + 1);
        save_matrix_csv(fp.blocks[static_cast<std::size_t>(i)], dir / name);
    }
    save_vector_csv(fp.response, dir / "b.csv");
    if (fp.truth) save_vector_csv(*fp.truth, dir / "truth.csv");
    std::ofstream meta(dir / "meta.txt");
    if (!meta) throw DataError("cannot write " + (dir / "meta.txt").string());
    meta << "N=" << fp.num_agents() << '\n' << "M=" << fp.num_samples() << '\n' << "sizes=";
    auto sizes = fp.sizes();
    for (std::size_t i = 0; i < sizes.size(); ++i) meta << (i ? "," : "") << sizes[i];
    meta << '\n' << "seed=" << fp.seed << '\n';
}

FeaturePartition load_partition(const std::filesystem::path& dir) {
    auto meta = read_meta(dir / "meta.txt");
    if (!meta.count("N") || !meta.count("M")) throw DataError(dir.string() + "/meta.txt: missing N or M");
    const int n = std::stoi(meta["N"]);
    const Eigen::Index m = std::stol(meta["M"]);
    FeaturePartition fp;
    for (int i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "block_%03d.csv", i + 1);
        fp.blocks.push_back(load_matrix_csv(dir / name));
    }
    fp.response = load_vector_csv(dir / "b.csv");
    if (std::filesystem::exists(dir / "truth.csv")) fp.truth = load_vector_csv(dir / "truth.csv");
    if (meta.count("seed")) fp.seed = std::stoull(meta["seed"]);
    if (fp.num_samples() != m) throw DataError(dir.string() + ": b.csv length disagrees with meta.txt M");
    if (meta.count("sizes")) {
        std::istringstream ss(meta["sizes"]);
        std::string tok;
        std::size_t i = 0;
        while (std::getline(ss, tok, ',')) {
            if (i >= fp.blocks.size() || fp.blocks[i].cols() != std::stol(tok)) {
                throw DataError(dir.string() + ": block sizes disagree with meta.txt");
            }
            ++i;
        }
    }
    fp.validate();
    return fp;
}

} // namespace featadmm
