#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "exitrack/nn/tensor.hpp"

namespace exitrack::nn {

using Gradients = std::vector<Matrix>;

/// Named parameter tensors, each tagged with the block it belongs to
/// (used for freezing and block checksums). Insertion order is the
/// serialization order.
class ParameterSet {
public:
    int add(std::string name, std::string block, Matrix init);

    [[nodiscard]] int size() const { return static_cast<int>(values_.size()); }
    [[nodiscard]] const std::string& name(int id) const { return names_[static_cast<std::size_t>(id)]; }
    [[nodiscard]] const std::string& block(int id) const { return blocks_[static_cast<std::size_t>(id)]; }
    [[nodiscard]] const Matrix& value(int id) const { return values_[static_cast<std::size_t>(id)]; }
    [[nodiscard]] Matrix& value(int id) { return values_[static_cast<std::size_t>(id)]; }
    [[nodiscard]] int find(std::string_view name) const;
    [[nodiscard]] std::size_t total_size() const;

    [[nodiscard]] Gradients zero_gradients() const;

    /// FNV-1a over the names and raw bytes of every tensor in `block`.
    [[nodiscard]] std::uint64_t checksum(std::string_view block) const;
    [[nodiscard]] std::uint64_t checksum() const;

private:
    std::vector<std::string> names_;
    std::vector<std::string> blocks_;
    std::vector<Matrix> values_;
};

void add_into(Gradients& acc, const Gradients& g);
[[nodiscard]] double global_norm(const Gradients& g);

}  // namespace exitrack::nn
