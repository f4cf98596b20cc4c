#pragma once

#include "vitscape/tensor.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace vitscape {

// Ordered, named collection of tensors. Insertion order is the canonical
// order for initialization, serialization and optimizer traversal.
class ParameterSet {
public:
    void add(std::string name, Tensor value);
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;

    std::size_t size() const { return names_.size(); }
    bool empty() const { return names_.empty(); }
    // index of name, or size() when absent
    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? names_.size() : it->second;
    }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t i) const { return names_[i]; }
    Tensor& value(std::size_t i) { return values_[i]; }
    const Tensor& value(std::size_t i) const { return values_[i]; }

    long long total_elements() const;

    // true when both sets hold the same names in the same order with the
    // same shapes
    bool same_layout(const ParameterSet& o) const;
    // names present here but absent in o
    std::vector<std::string> missing_from(const ParameterSet& o) const;
    bool same_bits(const ParameterSet& o) const;

    static ParameterSet zeros_like(const ParameterSet& o);

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

// layout mismatch -> ContractError listing the missing names
void require_same_layout(const ParameterSet& a, const ParameterSet& b, const std::string& what);

// FNV-1a over the raw parameter bytes in canonical order; used for freeze
// checks and checkpoint integrity.
std::uint64_t param_bytes_hash(const ParameterSet& p);

} // namespace vitscape
