#include "featadmm/functions.hpp"

#include "featadmm/format.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <string>

namespace featadmm {

FunctionSpec::FunctionSpec(FunctionKind k, double l1, double l2) : kind_(k), l1_(l1), l2_(l2) {
    if (!(l1 >= 0.0) || !(l2 >= 0.0) || !std::isfinite(l1) || !std::isfinite(l2)) {
        throw std::invalid_argument("function parameters must be finite and nonnegative");
    }
}

double FunctionSpec::value(const Vector& v) const {
    double out = 0.0;
    if (l1_ != 0.0) out += l1_ * v.lpNorm<1>();
    if (l2_ != 0.0) out += l2_ * v.squaredNorm();
    return out;
}

Vector FunctionSpec::gradient(const Vector& v) const {
    if (l1_ != 0.0) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (v[i] == 0.0) {
                throw NonSmoothError(to_string() + " is not differentiable at coordinate " + std::to_string(i));
            }
        }
    }
    return subgradient(v);
}

Vector FunctionSpec::subgradient(const Vector& v) const {
    Vector g = (2.0 * l2_) * v;
    if (l1_ != 0.0) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (v[i] > 0.0) g[i] += l1_;
            else if (v[i] < 0.0) g[i] -= l1_;
        }
    }
    return g;
}

Vector FunctionSpec::prox(double lambda, const Vector& q) const {
    if (!(lambda > 0.0)) throw std::invalid_argument("prox: lambda must be positive");
    Vector s = l1_ != 0.0 ? soft_threshold(q, lambda * l1_) : q;
    if (l2_ != 0.0) s /= 1.0 + 2.0 * lambda * l2_;
    return s;
}

double FunctionSpec::subdifferential_distance(const Vector& v, const Vector& g) const {
    // The subdifferential is a box per coordinate: 2 l2 v_i + l1 * [-1, 1] at
    // zero, or the single gradient value elsewhere.
    double sq = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double smooth = 2.0 * l2_ * v[i];
        double d;
        if (l1_ == 0.0) d = g[i] - smooth;
        else if (v[i] > 0.0) d = g[i] - (smooth + l1_);
        else if (v[i] < 0.0) d = g[i] - (smooth - l1_);
        else d = std::max(0.0, std::abs(g[i] - smooth) - l1_);
        sq += d * d;
    }
    return std::sqrt(sq);
}

std::string FunctionSpec::to_string() const {
    switch (kind_) {
    case FunctionKind::squared_l2_loss: return "squared_l2_loss";
    case FunctionKind::abs_l1_loss: return "abs_l1_loss";
    case FunctionKind::squared_l2_reg: return "l2_reg:eta=" + format_double(l2_);
    case FunctionKind::l1_reg: return "l1_reg:eta=" + format_double(l1_);
    case FunctionKind::elastic_net_reg:
        return "elastic_net:eta1=" + format_double(l1_) + ",eta2=" + format_double(l2_);
    }
    return "?";
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::map<std::string, double, std::less<>> parse_params(std::string_view text, std::string_view params) {
    std::map<std::string, double, std::less<>> out;
    while (!params.empty()) {
        auto comma = params.find(',');
        auto item = trim(params.substr(0, comma));
        params = comma == std::string_view::npos ? std::string_view{} : params.substr(comma + 1);
        auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw SpecParseError("function spec `" + std::string(text) + "`: expected key=value, got `" +
                                 std::string(item) + "`");
        }
        auto key = trim(item.substr(0, eq));
        auto val = trim(item.substr(eq + 1));
        double x = 0.0;
        auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), x);
        if (ec != std::errc() || ptr != val.data() + val.size()) {
            throw SpecParseError("function spec `" + std::string(text) + "`: bad number `" + std::string(val) + "`");
        }
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw SpecParseError("function spec `" + std::string(text) + "`: parameters must be nonnegative");
        }
        out.emplace(std::string(key), x);
    }
    return out;
}

double take(std::map<std::string, double, std::less<>>& params, std::string_view key, std::string_view text) {
    auto it = params.find(key);
    if (it == params.end()) {
        throw SpecParseError("function spec `" + std::string(text) + "`: missing `" + std::string(key) + "`");
    }
    double v = it->second;
    params.erase(it);
    return v;
}

} // namespace

FunctionSpec parse_function_spec(std::string_view text) {
    auto t = trim(text);
    auto colon = t.find(':');
    auto name = trim(t.substr(0, colon));
    auto params = parse_params(text, colon == std::string_view::npos ? std::string_view{} : t.substr(colon + 1));

    auto finish = [&](FunctionSpec spec) {
        if (!params.empty()) {
            throw SpecParseError("function spec `" + std::string(text) + "`: unexpected parameter `" +
                                 params.begin()->first + "`");
        }
        return spec;
    };

    if (name == "squared_l2_loss") return finish(FunctionSpec::squared_l2_loss());
    if (name == "abs_l1_loss") return finish(FunctionSpec::abs_l1_loss());
    if (name == "l2_reg") return finish(FunctionSpec::squared_l2_reg(take(params, "eta", text)));
    if (name == "l1_reg") return finish(FunctionSpec::l1_reg(take(params, "eta", text)));
    if (name == "elastic_net") {
        double e1 = take(params, "eta1", text);
        double e2 = take(params, "eta2", text);
        return finish(FunctionSpec::elastic_net(e1, e2));
    }
    throw SpecParseError("unknown function spec `" + std::string(text) + "`");
}

Vector soft_threshold(const Vector& q, double t) {
    return q.unaryExpr([t](double x) { return x > t ? x - t : (x < -t ? x + t : 0.0); });
}

} // namespace featadmm
