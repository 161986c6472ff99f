#include "exitrack/nn/parameters.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace exitrack::nn {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

}  // namespace

int ParameterSet::add(std::string name, std::string block, Matrix init) {
    if (find(name) >= 0) throw std::invalid_argument("duplicate parameter " + name);
    names_.push_back(std::move(name));
    blocks_.push_back(std::move(block));
    values_.push_back(std::move(init));
    return size() - 1;
}

int ParameterSet::find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return static_cast<int>(i);
    }
    return -1;
}

std::size_t ParameterSet::total_size() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
    return n;
}

Gradients ParameterSet::zero_gradients() const {
    Gradients g;
    g.reserve(values_.size());
    for (const auto& v : values_) g.push_back(Matrix::Zero(v.rows(), v.cols()));
    return g;
}

std::uint64_t ParameterSet::checksum(std::string_view block) const {
    std::uint64_t h = kFnvOffset;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (blocks_[i] != block) continue;
        h = fnv1a(h, names_[i].data(), names_[i].size());
        h = fnv1a(h, values_[i].data(), static_cast<std::size_t>(values_[i].size()) * sizeof(double));
    }
    return h;
}

std::uint64_t ParameterSet::checksum() const {
    std::uint64_t h = kFnvOffset;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        h = fnv1a(h, names_[i].data(), names_[i].size());
        h = fnv1a(h, values_[i].data(), static_cast<std::size_t>(values_[i].size()) * sizeof(double));
    }
    return h;
}

void add_into(Gradients& acc, const Gradients& g) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

double global_norm(const Gradients& g) {
    double s = 0.0;
    for (const auto& m : g) s += m.squaredNorm();
    return std::sqrt(s);
}

}  // namespace exitrack::nn
