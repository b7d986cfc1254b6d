#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace hecta::nn {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Index numel(const std::vector<Index>& shape) {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

// Dense array with a shape; data is row-major.
template <typename Scalar>
struct Tensor {
    std::vector<Index> shape;
    Vector<Scalar> data;

    Tensor() = default;
    explicit Tensor(std::vector<Index> s) : shape(std::move(s)), data(Vector<Scalar>::Zero(numel(shape))) {}

    Index size() const { return data.size(); }
    Index rows() const { return shape.empty() ? 1 : shape.front(); }
    Index cols() const { return rows() == 0 ? 0 : size() / rows(); }

    Eigen::Map<RowMatrix<Scalar>> matrix() { return {data.data(), rows(), cols()}; }
    Eigen::Map<const RowMatrix<Scalar>> matrix() const { return {data.data(), rows(), cols()}; }

    bool operator==(const Tensor& o) const { return shape == o.shape && data == o.data; }
};

// Named collection of trainable arrays. Copies are deep, so a target network is
// just a copy of the evaluation store.
template <typename Scalar>
class ParamStore {
public:
    using Entries = std::map<std::string, Tensor<Scalar>>;

    Tensor<Scalar>& add(const std::string& name, std::vector<Index> shape) {
        auto [it, inserted] = entries_.try_emplace(name, std::move(shape));
        if (!inserted) throw std::invalid_argument("parameter '" + name + "' declared twice");
        return it->second;
    }

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    Tensor<Scalar>& at(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw std::out_of_range("no parameter '" + name + "'");
        return it->second;
    }
    const Tensor<Scalar>& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw std::out_of_range("no parameter '" + name + "'");
        return it->second;
    }

    Eigen::Map<RowMatrix<Scalar>> matrix(const std::string& name) { return at(name).matrix(); }
    Eigen::Map<const RowMatrix<Scalar>> matrix(const std::string& name) const { return at(name).matrix(); }
    Vector<Scalar>& vector(const std::string& name) { return at(name).data; }
    const Vector<Scalar>& vector(const std::string& name) const { return at(name).data; }

    ParamStore zeros_like() const {
        ParamStore out;
        for (const auto& [name, t] : entries_) out.add(name, t.shape);
        return out;
    }

    void set_zero() {
        for (auto& [name, t] : entries_) t.data.setZero();
    }

    bool same_layout(const ParamStore& other) const {
        if (entries_.size() != other.entries_.size()) return false;
        auto a = entries_.begin();
        auto b = other.entries_.begin();
        for (; a != entries_.end(); ++a, ++b)
            if (a->first != b->first || a->second.shape != b->second.shape) return false;
        return true;
    }

    bool all_finite() const {
        for (const auto& [name, t] : entries_)
            if (!t.data.allFinite()) return false;
        return true;
    }

    Index parameter_count() const {
        Index n = 0;
        for (const auto& [name, t] : entries_) n += t.size();
        return n;
    }

    std::size_t size() const { return entries_.size(); }
    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    bool operator==(const ParamStore& o) const { return entries_ == o.entries_; }

private:
    Entries entries_;
};

template <typename Scalar, typename Rng>
void init_uniform(Tensor<Scalar>& t, Scalar bound, Rng& rng) {
    std::uniform_real_distribution<double> u(-static_cast<double>(bound), static_cast<double>(bound));
    for (Index i = 0; i < t.size(); ++i) t.data(i) = static_cast<Scalar>(u(rng));
}

}  // namespace hecta::nn
