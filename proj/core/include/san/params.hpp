#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "san/tensor.hpp"

namespace san {

// Named collection of trainable leaf tensors. Registration order is stable
// and defines the checkpoint layout. Rows of embedding-style parameters can
// be frozen (excluded from optimizer updates).
class ParamSet {
public:
    Tensor add(const std::string& name, Tensor t);

    bool has(const std::string& name) const;
    const Tensor& get(const std::string& name) const;
    Tensor& get(const std::string& name);

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }
    std::size_t total_elements() const;

    void zero_grad();

    // mask[i] != 0 freezes row i of a rank-2 parameter.
    void set_frozen_rows(const std::string& name,
                         std::vector<std::uint8_t> mask);
    // nullptr when nothing is frozen for this parameter.
    const std::vector<std::uint8_t>* frozen_rows(const std::string& name) const;

    // Deep copy: fresh leaves with identical values (grads not copied).
    ParamSet clone() const;
    // Copies values from another set with identical names/shapes.
    void copy_values_from(const ParamSet& other);

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, Tensor> tensors_;
    std::unordered_map<std::string, std::vector<std::uint8_t>> frozen_;
};

}  // namespace san
