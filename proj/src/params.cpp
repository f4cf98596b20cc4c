#include "vitscape/params.hpp"

#include "vitscape/errors.hpp"

#include <sstream>

namespace vitscape {

void ParameterSet::add(std::string name, Tensor value) {
    if (index_.count(name)) {
        fail_contract("duplicate parameter name: " + name);
    }
    index_.emplace(name, names_.size());
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
}

Tensor& ParameterSet::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) {
        fail_contract("unknown parameter name: " + name);
    }
    return values_[it->second];
}

const Tensor& ParameterSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        fail_contract("unknown parameter name: " + name);
    }
    return values_[it->second];
}

long long ParameterSet::total_elements() const {
    long long n = 0;
    for (const Tensor& t : values_) {
        n += t.numel();
    }
    return n;
}

bool ParameterSet::same_layout(const ParameterSet& o) const {
    if (names_ != o.names_) {
        return false;
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!values_[i].same_shape(o.values_[i])) {
            return false;
        }
    }
    return true;
}

std::vector<std::string> ParameterSet::missing_from(const ParameterSet& o) const {
    std::vector<std::string> missing;
    for (const std::string& n : names_) {
        if (!o.has(n)) {
            missing.push_back(n);
        }
    }
    return missing;
}

bool ParameterSet::same_bits(const ParameterSet& o) const {
    if (!same_layout(o)) {
        return false;
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!values_[i].same_bits(o.values_[i])) {
            return false;
        }
    }
    return true;
}

ParameterSet ParameterSet::zeros_like(const ParameterSet& o) {
    ParameterSet z;
    for (std::size_t i = 0; i < o.size(); ++i) {
        z.add(o.name(i), Tensor::zeros(o.value(i).shape()));
    }
    return z;
}

void require_same_layout(const ParameterSet& a, const ParameterSet& b, const std::string& what) {
    if (a.same_layout(b)) {
        return;
    }
    std::ostringstream os;
    os << what << ": parameter sets disagree";
    auto ma = a.missing_from(b);
    auto mb = b.missing_from(a);
    if (!ma.empty()) {
        os << "; missing on the right:";
        for (const auto& n : ma) {
            os << " " << n;
        }
    }
    if (!mb.empty()) {
        os << "; missing on the left:";
        for (const auto& n : mb) {
            os << " " << n;
        }
    }
    if (ma.empty() && mb.empty()) {
        os << " (shape or order mismatch)";
    }
    fail_contract(os.str());
}

std::uint64_t param_bytes_hash(const ParameterSet& p) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Tensor& t = p.value(i);
        const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
        const std::size_t n = static_cast<std::size_t>(t.numel()) * sizeof(double);
        for (std::size_t b = 0; b < n; ++b) {
            h ^= bytes[b];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

} // namespace vitscape
