#include "san/params.hpp"

namespace san {

Tensor ParamSet::add(const std::string& name, Tensor t) {
    if (tensors_.count(name))
        throw ContractError("params: duplicate name " + name);
    if (!t.defined()) throw ContractError("params: undefined tensor " + name);
    names_.push_back(name);
    tensors_.emplace(name, t);
    return t;
}

bool ParamSet::has(const std::string& name) const {
    return tensors_.count(name) != 0;
}

const Tensor& ParamSet::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end())
        throw ContractError("params: unknown name " + name);
    return it->second;
}

Tensor& ParamSet::get(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end())
        throw ContractError("params: unknown name " + name);
    return it->second;
}

std::size_t ParamSet::total_elements() const {
    std::size_t n = 0;
    for (const auto& name : names_) n += get(name).size();
    return n;
}

void ParamSet::zero_grad() {
    for (const auto& name : names_) {
        auto& g = get(name).node()->grad;
        std::fill(g.begin(), g.end(), 0.0);
    }
}

void ParamSet::set_frozen_rows(const std::string& name,
                               std::vector<std::uint8_t> mask) {
    const Tensor& t = get(name);
    if (t.rank() != 2 || mask.size() != t.dim(0))
        throw ContractError("params: frozen-row mask mismatch for " + name);
    frozen_[name] = std::move(mask);
}

const std::vector<std::uint8_t>* ParamSet::frozen_rows(
    const std::string& name) const {
    auto it = frozen_.find(name);
    return it == frozen_.end() ? nullptr : &it->second;
}

ParamSet ParamSet::clone() const {
    ParamSet out;
    Graph scratch;
    for (const auto& name : names_) {
        const Tensor& t = get(name);
        out.add(name, scratch.leaf(t.shape(), t.value(), t.requires_grad()));
    }
    out.frozen_ = frozen_;
    return out;
}

void ParamSet::copy_values_from(const ParamSet& other) {
    for (const auto& name : names_) {
        Tensor& dst = get(name);
        const Tensor& src = other.get(name);
        if (src.shape() != dst.shape())
            throw DimensionError("params: shape mismatch copying " + name);
        dst.value() = src.value();
    }
}

}  // namespace san
