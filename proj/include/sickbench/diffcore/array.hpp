#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace sickbench::diffcore {

// Dense row-major array of doubles. Shape is explicit; data.size() always
// equals the product of the dimensions.
struct Array {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Array() = default;
    explicit Array(std::vector<std::size_t> s);
    Array(std::vector<std::size_t> s, std::vector<double> d);

    static Array scalar(double v) { return Array({1}, {v}); }
    static Array full(std::vector<std::size_t> s, double v);

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    bool same_shape(const Array& other) const { return shape == other.shape; }
    bool all_finite() const;
};

std::string shape_str(const std::vector<std::size_t>& shape);
std::size_t shape_numel(const std::vector<std::size_t>& shape);

}  // namespace sickbench::diffcore
